#include "doctest.h"

#include <filesystem>
#include <thread>
#include <unistd.h>

#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"
#include "tagfont/corpus/png.hpp"
#include "tagfont/service/server.hpp"

using namespace tagfont;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct IndexSetup {
  testutil::TinySetup t;
  recognizer::FontClassifier fc;
  attention::AttentionModule att;
  retrieval::AffinityHead head;
  service::FontIndex index;

  IndexSetup() : fc(t.font_classifier(1)) {
    nn::Rng rng(11);
    att = attention::AttentionModule(fc.n_classes(), t.stage1.feature_dim());
    att.init(rng, 0.0, 5.0);
    head = retrieval::AffinityHead(t.stage1.n_tags(), 0.1, 1e-6);
    head.init(rng, 1.0, 0.02);
    index = build();
  }

  service::FontIndex build() {
    return service::build_index(t.m, *t.store, t.stage1, t.stage1, fc, att, "model-v1");
  }
};

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tagfont_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("font index build and persistence") {
  IndexSetup s;
  const auto& ix = s.index;
  REQUIRE(ix.n_fonts() == s.t.m.fonts.size());
  for (const auto& f : s.t.m.fonts) {
    CHECK(ix.font_probabilities(service::Variant::kBasic, f.font_id) ==
          recognizer::font_tag_probabilities(s.t.stage1, *s.t.store, f.font_id));
  }
  const std::string bytes = ix.serialize();
  CHECK(s.build().serialize() == bytes);

  const auto back = service::FontIndex::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  CHECK_NOTHROW(back.check_compatible(s.t.m.vocabulary, "model-v1"));
  CHECK_THROWS_AS(back.check_compatible(s.t.m.vocabulary, "model-v2"), FormatError);
  corpus::TagVocabulary other({"zzz"}, {1});
  CHECK_THROWS_AS(back.check_compatible(other, "model-v1"), FormatError);

  auto ck = nn::Checkpoint::deserialize(bytes);
  ck.set_text("index.format", "99");
  CHECK_THROWS_AS(service::FontIndex::deserialize(ck.serialize()), FormatError);

  const auto dir = scratch_dir("index");
  ix.save((dir / "index.bin").string());
  CHECK(service::FontIndex::load((dir / "index.bin").string()).serialize() == bytes);
  fs::remove_all(dir);
}

TEST_CASE("tag listing and search") {
  IndexSetup s;
  const auto tags = service::list_tags(s.index);
  CHECK(tags.size() == s.t.m.vocabulary.size());
  CHECK(service::list_tags(s.index).size() == tags.size());
  for (std::size_t i = 1; i < tags.size(); ++i) {
    const bool ordered = tags[i - 1].frequency > tags[i].frequency ||
                         (tags[i - 1].frequency == tags[i].frequency && tags[i - 1].tag < tags[i].tag);
    CHECK(ordered);
  }
  const int n = static_cast<int>(s.index.n_fonts());
  for (const auto& t : tags) {
    for (auto v : {service::Variant::kBasic, service::Variant::kFull}) {
      const auto r = service::search({{t.tag}, 1000, v}, s.index, s.head);
      CHECK(static_cast<int>(r.results.size()) == n);
      for (std::size_t i = 1; i < r.results.size(); ++i) {
        CHECK(r.results[i - 1].score >= r.results[i].score);
        if (r.results[i - 1].score == r.results[i].score) CHECK(r.results[i - 1].font_id < r.results[i].font_id);
      }
    }
  }
  REQUIRE(tags.size() >= 2);
  const auto multi = service::search({{tags[0].tag, tags[1].tag}, 3, service::Variant::kFull}, s.index, s.head);
  CHECK(multi.results.size() == 3);
  CHECK(multi.query.size() == 2);

  // raw spellings go through tag normalization
  std::string upper = tags[0].tag;
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  CHECK(service::search({{upper}, 2, service::Variant::kBasic}, s.index, s.head).query ==
        std::vector<std::string>{tags[0].tag});

  CHECK_THROWS_AS(service::search({{tags[0].tag}, 0, service::Variant::kFull}, s.index, s.head), InvalidArgument);
  try {
    service::search({{"zzzz", tags[0].tag, "qqqq"}, 3, service::Variant::kFull}, s.index, s.head);
    FAIL("expected UnknownTagError");
  } catch (const retrieval::UnknownTagError& e) {
    CHECK(e.tags() == std::vector<std::string>{"qqqq", "zzzz"});
  }
}

TEST_CASE("http endpoints") {
  IndexSetup s;
  const auto dir = scratch_dir("previews");
  const std::string first_tag = service::list_tags(s.index)[0].tag;
  service::SearchService svc(s.index, s.head, s.t.m, dir.string());

  // handler-level contract
  auto bad = json::parse(svc.search(R"({"tags": ["nope", "alsonope"], "k": 3})").body);
  CHECK(bad["code"] == "unknown_tags");
  CHECK(bad["details"]["unknown_tags"] == json({"alsonope", "nope"}));
  CHECK(svc.search(R"({"tags": ["x"], "k": 0})").status == 400);
  CHECK(svc.search("not json").status == 400);
  CHECK(svc.search(R"({"tags": []})").status == 400);
  CHECK(svc.search(R"({"tags": ["a"], "variant": "fancy"})").status == 400);
  CHECK(svc.preview("nofont", "a", 64).status == 404);
  CHECK(svc.preview(s.t.m.fonts[0].font_id, "%", 64).status == 404);

  service::HttpServer server(svc);
  const int port = server.bind("127.0.0.1", 0);
  std::thread th([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  for (int i = 0; i < 50 && !cli.Get("/api/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(20));

  auto health = cli.Get("/api/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body)["fonts"] == s.t.m.fonts.size());

  auto tags = cli.Get("/api/tags");
  REQUIRE(tags);
  CHECK(json::parse(tags->body)["tags"].size() == s.t.m.vocabulary.size());

  const std::string req = json{{"tags", {first_tag}}, {"k", 4}, {"variant", "full"}}.dump();
  auto res = cli.Post("/api/search", req, "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto body = json::parse(res->body);
  CHECK(body["results"].size() == 4);
  CHECK(body["query"] == json({first_tag}));

  std::vector<std::string> bodies(8);
  std::vector<std::thread> clients;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    clients.emplace_back([&, i] {
      httplib::Client c("127.0.0.1", port);
      if (auto r = c.Post("/api/search", req, "application/json")) bodies[i] = r->body;
    });
  }
  for (auto& c : clients) c.join();
  for (const auto& b : bodies) CHECK(b == res->body);

  auto err = cli.Post("/api/search", R"({"tags": ["zzz"]})", "application/json");
  REQUIRE(err);
  CHECK(err->status == 400);
  CHECK(json::parse(err->body)["details"]["unknown_tags"] == json({"zzz"}));

  const std::string id = s.t.m.fonts[0].font_id;
  auto png = cli.Get(("/api/preview/" + id + "/g.png?size=32").c_str());
  REQUIRE(png);
  CHECK(png->status == 200);
  CHECK(png->get_header_value("Content-Type") == "image/png");
  int w = 0, h = 0;
  corpus::decode_png_gray(png->body, w, h);
  CHECK((w == 32 && h == 32));
  CHECK(fs::exists(svc.preview_path(id, 'g', 32)));
  auto again = cli.Get(("/api/preview/" + id + "/g.png?size=32").c_str());
  REQUIRE(again);
  CHECK(again->body == png->body);

  auto missing = cli.Get("/api/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  CHECK(json::parse(missing->body)["code"] == "not_found");

  server.stop();
  th.join();
  fs::remove_all(dir);
}

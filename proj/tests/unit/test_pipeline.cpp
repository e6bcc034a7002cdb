#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "json.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/common/hash.hpp"
#include "tagfont/pipeline/runner.hpp"

using namespace tagfont;
using namespace tagfont::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("tagfont_pipe_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

ConfigSources tiny_sources(const fs::path& out) {
  ConfigSources s;
  s.out = out.string();
  s.overrides = {"corpus.n_fonts=20",           "corpus.min_count=3",
                 "corpus.image_size=32",        "backbone.feature_dim=16",
                 "backbone.widths=[4,8]",       "stage1.epochs=2",
                 "stage1.val_glyphs=aA",        "font_classifier.max_epochs=2",
                 "gan.gen_widths=[4,8,8]",      "gan.disc_width=4",
                 "gan.patch_grid=6",            "stage2.max_phase_a_epochs=2",
                 "stage2.phase_b_epochs=1",     "stage2.probe_pairs_per_font=1",
                 "attention.epochs=2",          "retrieval.epochs=2",
                 "retrieval.triplets_per_epoch=100", "queries.amt_groups=20"};
  return s;
}

void run_all(Runner& r, const std::vector<std::string>& steps) {
  for (const auto& s : steps) r.run(s);
}

}  // namespace

TEST_CASE("config defaults and layering") {
  const PipelineConfig d = resolve_config({});
  CHECK(d.gan.lambda_l1 == 10.0);
  CHECK(d.gan.beta == 0.04);
  CHECK(d.attention.J == 4);
  CHECK(d.retrieval.alpha == 0.1);
  CHECK(d.retrieval.gamma == 100.0);
  for (int b : {d.stage1.batch_size, d.font_classifier.batch_size, d.stage2.batch_size, d.attention.batch_size,
                d.retrieval.batch_size}) {
    CHECK(b == 20);
  }
  CHECK(d.backbone.input_size == d.corpus.image_size);
  CHECK(d.gan.feature_dim == d.backbone.feature_dim);

  const auto dir = scratch("layers");
  fs::create_directories(dir);
  const auto file = dir / "user.json";
  std::ofstream(file) << R"({"seed": 5, "corpus": {"n_fonts": 30}, "retrieval": {"gamma": 50}})";
  ConfigSources s;
  s.config_file = file.string();
  auto c = resolve_config(s);
  CHECK(c.seed == 5);
  CHECK(c.corpus.n_fonts == 30);
  CHECK(c.retrieval.gamma == 50.0);
  CHECK(c.retrieval.alpha == 0.1);
  CHECK(c.stage1.seed == 6);

  s.seed = 9;
  s.overrides = {"retrieval.gamma=70", "eval.variants=[\"oracle\"]", "out=elsewhere"};
  c = resolve_config(s);
  CHECK(c.seed == 9);
  CHECK(c.backbone.seed == 9);
  CHECK(c.retrieval.gamma == 70.0);
  CHECK(c.eval.variants == std::vector<std::string>{"oracle"});
  CHECK(c.out == "elsewhere");

  // the persisted form loads back to the same config
  CHECK(config_hash(PipelineConfig::from_json(c.resolved_json())) == config_hash(c));
  CHECK(config_hash(c) != config_hash(d));

  auto bad = [](std::vector<std::string> o) {
    ConfigSources b;
    b.overrides = std::move(o);
    return b;
  };
  CHECK_THROWS_AS(resolve_config(bad({"corpus.n_font=3"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"corpus.n_fonts=many"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"corpus.n_fonts=2.5"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"corpus=3"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"noequals"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"backbone.seed=3"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"eval.split=train"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"eval.variants=[\"magic\"]"})), ConfigError);
  CHECK_THROWS_AS(resolve_config(bad({"gan.lambda_l1=-1"})), ConfigError);
  CHECK(resolve_config(bad({"retrieval.gamma=7"})).retrieval.gamma == 7.0);

  std::ofstream(file) << R"({"corpus": {"colour": 1}})";
  CHECK_THROWS_AS(resolve_config(s), ConfigError);
  std::ofstream(file) << "{not json";
  CHECK_THROWS_AS(resolve_config(s), ConfigError);
  s.config_file = (dir / "missing.json").string();
  CHECK_THROWS_AS(resolve_config(s), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == 2);
  CHECK(exit_code_for(MissingPrerequisite("x", "synth")) == 3);
  CHECK(exit_code_for(NumericalDivergence("x")) == 4);
  CHECK(exit_code_for(FormatError("x")) == 1);
}

TEST_CASE("stage prerequisites are named") {
  const auto dir = scratch("prereq");
  Runner r(resolve_config(tiny_sources(dir)));
  try {
    r.run("train-stage1");
    FAIL("expected MissingPrerequisite");
  } catch (const MissingPrerequisite& e) {
    CHECK(e.required_stage() == "synth");
  }
  r.run("synth");
  const std::vector<std::pair<std::string, std::string>> needs = {{"train-stage2", "train-stage1"},
                                                                   {"train-stage3", "train-stage2"},
                                                                   {"train-stage4", "train-stage3"},
                                                                   {"reconstruct", "train-stage3"},
                                                                   {"build-index", "train-stage1"},
                                                                   {"serve", "build-index"}};
  for (const auto& [cmd, stage] : needs) {
    try {
      r.run(cmd);
      FAIL("expected MissingPrerequisite for " << cmd);
    } catch (const MissingPrerequisite& e) {
      CHECK(e.required_stage() == stage);
      CHECK(std::string(e.what()).find(stage) != std::string::npos);
    }
  }
  CHECK(!fs::exists(r.layout().lock()));

  // through the command line
  const std::string out = "--out=" + dir.string();
  std::vector<std::string> args = {"tagfont", "train-stage2", out};
  for (const auto& o : tiny_sources(dir).overrides) {
    args.push_back("--override");
    args.push_back(o);
  }
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 3);
  args[1] = "no-such-command";
  CHECK(run_cli(static_cast<int>(argv.size()), argv.data()) == 2);
  fs::remove_all(dir);
}

TEST_CASE("lock file blocks a second writer") {
  const auto dir = scratch("lock");
  fs::create_directories(dir);
  Runner r(resolve_config(tiny_sources(dir)));
  {
    OutputLock held(r.layout().lock());
    CHECK_THROWS_AS(r.run("synth"), Error);
    CHECK_THROWS_AS(OutputLock(r.layout().lock()), Error);
  }
  CHECK_NOTHROW(r.run("synth"));
  fs::remove_all(dir);
}

TEST_CASE("oracle evaluation, run manifests and pipeline determinism") {
  const auto dir_a = scratch("det_a"), dir_b = scratch("det_b");
  const std::vector<std::string> chain = {"synth", "train-stage1", "train-stage2", "train-stage3", "train-stage4"};
  std::vector<std::string> reports[2];
  for (int i = 0; i < 2; ++i) {
    auto src = tiny_sources(i == 0 ? dir_a : dir_b);
    src.overrides.push_back(R"(eval.variants=["oracle","basic","full"])");
    Runner r(resolve_config(src));
    run_all(r, chain);
    for (const auto& rep : r.evaluate()) reports[i].push_back(rep.to_json());
    const auto oracle = json::parse(reports[i][0]);
    for (const auto& s : oracle["query_sets"]) CHECK(s["map"] == 1.0);
  }
  CHECK(reports[0] == reports[1]);

  // manifest records the config hash and hashes that match the files
  Runner r(resolve_config(tiny_sources(dir_a)));
  r.run("evaluate");
  const auto m = json::parse(std::ifstream(r.layout().run_manifest("evaluate")));
  CHECK(m["config_hash"] == config_hash(r.config()));
  CHECK(m["inputs"].contains("stage4.ckpt"));
  CHECK(m["outputs"].size() >= 3);
  for (const auto& [rel, hash] : m["outputs"].items()) {
    CHECK(git_blob_hash_file((dir_a / rel).string()) == hash.get<std::string>());
  }
  CHECK(fs::exists(r.layout().resolved_config()));
  CHECK(config_hash(PipelineConfig::from_json(json::parse(std::ifstream(r.layout().resolved_config())).dump())) ==
        config_hash(r.config()));

  // both runs produced the same checkpoints
  for (int s = 1; s <= 4; ++s) {
    CHECK(git_blob_hash_file(Layout{dir_a}.checkpoint(s).string()) ==
          git_blob_hash_file(Layout{dir_b}.checkpoint(s).string()));
  }

  r.run("amt-eval");
  r.run("build-index");
  const std::string idx = git_blob_hash_file(r.layout().index().string());
  r.run("build-index");
  CHECK(git_blob_hash_file(r.layout().index().string()) == idx);
  r.run("reconstruct");
  CHECK(!fs::is_empty(r.layout().reconstructions()));

  // a changed checkpoint makes the index stale
  Runner again(resolve_config(tiny_sources(dir_a)));
  again.run("train-stage4");
  {
    auto src = tiny_sources(dir_a);
    src.overrides.push_back("retrieval.epochs=3");
    Runner changed(resolve_config(src));
    changed.run("train-stage4");
    try {
      changed.serve([](int) {});
      FAIL("expected stale index");
    } catch (const MissingPrerequisite& e) {
      CHECK(e.required_stage() == "build-index");
    }
  }
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

#include "tagfont/service/server.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "json.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/corpus/png.hpp"

namespace tagfont::service {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

HttpReply json_reply(const json& j, int status = 200) { return {status, "application/json", j.dump()}; }

std::string preview_url(const std::string& font_id, char c) {
  return "/api/preview/" + font_id + "/" + std::string(1, c) + ".png";
}

}  // namespace

HttpReply error_reply(int status, const std::string& code, const std::string& message,
                      const std::string& details_json) {
  return json_reply({{"code", code}, {"message", message}, {"details", json::parse(details_json)}}, status);
}

SearchService::SearchService(FontIndex index, retrieval::AffinityHead head, corpus::DatasetManifest manifest,
                             std::string preview_dir)
    : index_(std::move(index)), head_(std::move(head)), manifest_(std::move(manifest)),
      preview_dir_(std::move(preview_dir)) {
  manifest_.reindex();
  index_.check_compatible(manifest_.vocabulary, index_.model_version);
  if (head_.n_tags() != static_cast<int>(index_.vocabulary.size())) {
    throw FormatError("retrieval head has " + std::to_string(head_.n_tags()) + " inputs, index has " +
                      std::to_string(index_.vocabulary.size()) + " tags");
  }
  for (const auto& f : manifest_.fonts) {
    if (!std::count(index_.font_ids().begin(), index_.font_ids().end(), f.font_id)) {
      throw FormatError("font index does not cover font '" + f.font_id + "'; rerun build-index");
    }
  }
}

HttpReply SearchService::tags() const {
  json arr = json::array();
  for (const auto& t : list_tags(index_)) arr.push_back({{"tag", t.tag}, {"frequency", t.frequency}});
  return json_reply({{"tags", arr}});
}

HttpReply SearchService::search(const std::string& body) const {
  SearchRequest req;
  try {
    const json j = json::parse(body);
    if (!j.is_object() || !j.contains("tags") || !j["tags"].is_array()) {
      return error_reply(400, "bad_request", "body must be an object with a 'tags' array");
    }
    for (const auto& t : j["tags"]) {
      if (!t.is_string()) return error_reply(400, "bad_request", "tags must be strings");
      req.tags.push_back(t.get<std::string>());
    }
    if (j.contains("k")) {
      if (!j["k"].is_number_integer()) return error_reply(400, "bad_request", "k must be an integer");
      req.k = j["k"].get<int>();
    }
    if (j.contains("variant")) {
      if (!j["variant"].is_string()) return error_reply(400, "bad_request", "variant must be a string");
      req.variant = variant_from_string(j["variant"].get<std::string>());
    }
  } catch (const json::exception& e) {
    return error_reply(400, "bad_request", std::string("malformed JSON: ") + e.what());
  } catch (const InvalidArgument& e) {
    return error_reply(400, "bad_request", e.what());
  }
  if (req.tags.empty()) return error_reply(400, "empty_query", "query needs at least one tag");
  if (req.k <= 0) return error_reply(400, "invalid_k", "k must be positive", json{{"k", req.k}}.dump());

  try {
    const auto r = service::search(req, index_, head_);
    json results = json::array();
    for (std::size_t i = 0; i < r.results.size(); ++i) {
      json previews = json::array();
      for (char c : kPreviewText) previews.push_back(preview_url(r.results[i].font_id, c));
      results.push_back({{"rank", i + 1},
                         {"font_id", r.results[i].font_id},
                         {"score", r.results[i].score},
                         {"previews", previews}});
    }
    return json_reply({{"query", r.query}, {"variant", to_string(r.variant)}, {"k", req.k}, {"results", results}});
  } catch (const retrieval::UnknownTagError& e) {
    return error_reply(400, "unknown_tags", e.what(), json{{"unknown_tags", e.tags()}}.dump());
  } catch (const InvalidArgument& e) {
    return error_reply(400, "bad_request", e.what());
  }
}

std::string SearchService::preview_path(const std::string& font_id, char c, int size) const {
  return (fs::path(preview_dir_) / std::to_string(size) / corpus::glyph_filename(font_id, c)).string();
}

HttpReply SearchService::preview(const std::string& font_id, const std::string& character, int size) const {
  if (character.size() != 1 || !corpus::is_glyph(character[0])) {
    return error_reply(404, "not_found", "no glyph '" + character + "'");
  }
  const auto* font = manifest_.find(font_id);
  if (!font) return error_reply(404, "not_found", "unknown font '" + font_id + "'");
  if (size < 8 || size > 512) {
    return error_reply(400, "bad_request", "size must lie in [8, 512]", json{{"size", size}}.dump());
  }
  const char c = character[0];
  const std::string path = preview_path(font_id, c, size);
  std::lock_guard lock(preview_mu_);
  if (!fs::exists(path)) {
    fs::create_directories(fs::path(path).parent_path());
    const std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      const std::string png = corpus::encode_png(corpus::render_glyph(font->params, c, size, font_id));
      out.write(png.data(), static_cast<std::streamsize>(png.size()));
    }
    fs::rename(tmp, path);
  }
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return {200, "image/png", ss.str()};
}

HttpReply SearchService::health() const {
  return json_reply({{"status", "ok"},
                     {"fonts", index_.n_fonts()},
                     {"tags", index_.vocabulary.size()},
                     {"index_format", index_.format_version},
                     {"vocab_hash", index_.vocab_hash},
                     {"model_version", index_.model_version}});
}

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

void send(httplib::Response& res, const HttpReply& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(const SearchService& service) : impl_(std::make_unique<Impl>()) {
  auto& s = impl_->server;
  s.Get("/api/tags", [&service](const httplib::Request&, httplib::Response& res) { send(res, service.tags()); });
  s.Get("/api/health", [&service](const httplib::Request&, httplib::Response& res) { send(res, service.health()); });
  s.Post("/api/search", [&service](const httplib::Request& req, httplib::Response& res) {
    send(res, service.search(req.body));
  });
  s.Get(R"(/api/preview/([^/]+)/([^/]+)\.png)", [&service](const httplib::Request& req, httplib::Response& res) {
    int size = 64;
    if (req.has_param("size")) {
      try {
        size = std::stoi(req.get_param_value("size"));
      } catch (const std::exception&) {
        send(res, error_reply(400, "bad_request", "size must be an integer"));
        return;
      }
    }
    send(res, service.preview(req.matches[1], req.matches[2], size));
  });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) {
      send(res, error_reply(res.status, res.status == 404 ? "not_found" : "http_error",
                            "no route for " + req.method + " " + req.path));
    }
  });
  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    send(res, error_reply(500, "internal", what));
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw InvalidArgument("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace tagfont::service

#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "tagfont/service/index.hpp"

namespace tagfont::service {

// Characters of the per-font preview strip linked from search results.
inline constexpr std::string_view kPreviewText = "Handgloves";

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// JSON error body {code, message, details}.
HttpReply error_reply(int status, const std::string& code, const std::string& message,
                      const std::string& details_json = "{}");

// Request handlers over an immutable index. Everything except the preview
// cache is read-only after construction.
class SearchService {
 public:
  SearchService(FontIndex index, retrieval::AffinityHead head, corpus::DatasetManifest manifest,
                std::string preview_dir);

  HttpReply tags() const;
  HttpReply search(const std::string& body) const;
  // Renders on first request and caches the PNG on disk by (font, char, size).
  HttpReply preview(const std::string& font_id, const std::string& character, int size) const;
  HttpReply health() const;

  const FontIndex& index() const { return index_; }
  std::string preview_path(const std::string& font_id, char c, int size) const;

 private:
  FontIndex index_;
  retrieval::AffinityHead head_;
  corpus::DatasetManifest manifest_;
  std::string preview_dir_;
  mutable std::mutex preview_mu_;
};

// Binds the handlers to GET /api/tags, POST /api/search,
// GET /api/preview/{font_id}/{char}.png and GET /api/health.
class HttpServer {
 public:
  explicit HttpServer(const SearchService& service);
  ~HttpServer();

  // Returns the bound port (a free one when port is 0); throws on failure.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tagfont::service

#pragma once

#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "tagfont/eval/metrics.hpp"
#include "tagfont/pipeline/config.hpp"

namespace tagfont::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissing = 3;
inline constexpr int kExitDivergence = 4;

// ConfigError -> 2, MissingPrerequisite -> 3, NumericalDivergence -> 4,
// anything else -> 1.
int exit_code_for(const std::exception& e);

const std::vector<std::string>& subcommands();

// File names inside an output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path manifest() const { return root / "manifest.json"; }
  std::filesystem::path glyphs() const { return root / "glyphs"; }
  std::filesystem::path queries(const std::string& split, corpus::QueryKind kind) const;
  std::filesystem::path amt_groups() const { return root / "amt_groups.jsonl"; }
  std::filesystem::path checkpoint(int stage) const;
  std::filesystem::path font_classifier() const { return root / "font_classifier.ckpt"; }
  std::filesystem::path log(const std::string& name) const { return root / "logs" / (name + ".csv"); }
  std::filesystem::path metrics() const { return root / "metrics"; }
  std::filesystem::path index() const { return root / "index.bin"; }
  std::filesystem::path previews() const { return root / "previews"; }
  std::filesystem::path reconstructions() const { return root / "reconstruct"; }
  std::filesystem::path resolved_config() const { return root / "resolved_config.json"; }
  std::filesystem::path run_manifest(const std::string& subcommand) const;
  std::filesystem::path lock() const { return root / ".lock"; }
};

// Exclusive claim on an output directory, released on destruction. Throws
// Error when another run holds it.
class OutputLock {
 public:
  explicit OutputLock(const std::filesystem::path& path);
  ~OutputLock();
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  std::filesystem::path path_;
};

class Runner {
 public:
  explicit Runner(PipelineConfig config);
  ~Runner();

  // Runs one subcommand under the output lock, then writes the resolved
  // config and a run manifest with content hashes of inputs and outputs.
  void run(const std::string& subcommand);

  void synth();
  void render();
  void train_stage1();
  void train_stage2();
  void train_stage3();
  void train_stage4();
  std::vector<eval::MetricReport> evaluate();
  std::vector<eval::MetricReport> amt_eval();
  void build_index();
  // Blocks until the server stops. on_ready receives the bound port.
  void serve(const std::function<void(int)>& on_ready = {});
  void reconstruct();

  const PipelineConfig& config() const { return config_; }
  const Layout& layout() const { return layout_; }

 private:
  struct Models;

  corpus::DatasetManifest& manifest();
  corpus::GlyphStore& store();
  void record_input(const std::filesystem::path& p);
  void record_output(const std::filesystem::path& p);
  void write_text(const std::filesystem::path& p, const std::string& text);
  void write_run_manifest(const std::string& subcommand);

  PipelineConfig config_;
  Layout layout_;
  std::unique_ptr<corpus::DatasetManifest> manifest_;
  std::unique_ptr<corpus::GlyphStore> store_;
  std::unique_ptr<Models> models_;
  std::map<std::string, std::string> inputs_, outputs_;
};

// Parses argv (subcommand + flags), runs it and returns the exit code.
int run_cli(int argc, char** argv);

}  // namespace tagfont::pipeline

#include "tagfont/pipeline/runner.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "tagfont/common/errors.hpp"
#include "tagfont/common/hash.hpp"
#include "tagfont/corpus/png.hpp"
#include "tagfont/service/server.hpp"

namespace tagfont::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nn::Scalar;
using recognizer::GlyphBank;
using recognizer::TagRecognizer;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const MissingPrerequisite*>(&e)) return kExitMissing;
  if (dynamic_cast<const NumericalDivergence*>(&e)) return kExitDivergence;
  return kExitFailure;
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> all = {"synth",        "render",       "train-stage1", "train-stage2",
                                               "train-stage3", "train-stage4", "evaluate",     "amt-eval",
                                               "build-index",  "serve",        "reconstruct"};
  return all;
}

fs::path Layout::queries(const std::string& split, corpus::QueryKind kind) const {
  return root / "queries" / split / (corpus::to_string(kind) + ".jsonl");
}

fs::path Layout::checkpoint(int stage) const { return root / ("stage" + std::to_string(stage) + ".ckpt"); }

fs::path Layout::run_manifest(const std::string& subcommand) const {
  return root / "runs" / (subcommand + ".json");
}

OutputLock::OutputLock(const fs::path& path) : path_(path) {
  const int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    std::ifstream in(path);
    std::string holder;
    std::getline(in, holder);
    throw Error("output directory is locked by pid " + holder + " (" + path.string() +
                "); remove the file if that run is gone");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

OutputLock::~OutputLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

namespace {

const corpus::QueryKind kKinds[] = {corpus::QueryKind::kSingleFull, corpus::QueryKind::kSingleTop,
                                    corpus::QueryKind::kMulti};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw FormatError("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require(const fs::path& p, const std::string& stage) {
  if (!fs::exists(p)) throw MissingPrerequisite("missing " + p.string(), stage);
}

corpus::Split split_from_string(const std::string& s) {
  if (s == "train") return corpus::Split::kTrain;
  if (s == "val") return corpus::Split::kVal;
  if (s == "test") return corpus::Split::kTest;
  throw ConfigError("unknown split '" + s + "'");
}

void log_line(const std::string& sub, const std::string& msg) { std::cerr << "[" << sub << "] " << msg << "\n"; }

}  // namespace

struct Runner::Models {
  std::map<int, nn::Checkpoint> ckpts;
  std::map<int, TagRecognizer> recs;
  std::optional<recognizer::FontClassifier> font_model;
  std::optional<attention::AttentionModule> module;
  std::optional<retrieval::AffinityHead> head;
};

Runner::Runner(PipelineConfig config)
    : config_(std::move(config)), layout_{config_.out}, models_(std::make_unique<Models>()) {}

Runner::~Runner() = default;

corpus::DatasetManifest& Runner::manifest() {
  if (!manifest_) {
    require(layout_.manifest(), "synth");
    manifest_ = std::make_unique<corpus::DatasetManifest>(corpus::load_manifest(layout_.manifest().string()));
    const auto& o = manifest_->options;
    const auto& c = config_.corpus;
    if (o.n_fonts != c.n_fonts || o.seed != c.seed || o.min_count != c.min_count || o.preset != c.preset) {
      throw ConfigError("manifest.json was synthesized with other corpus settings; rerun synth");
    }
    record_input(layout_.manifest());
  }
  return *manifest_;
}

corpus::GlyphStore& Runner::store() {
  if (!store_) store_ = std::make_unique<corpus::GlyphStore>(manifest(), config_.corpus.image_size);
  return *store_;
}

void Runner::record_input(const fs::path& p) {
  inputs_[fs::relative(p, layout_.root).string()] = git_blob_hash_file(p.string());
}

void Runner::record_output(const fs::path& p) {
  outputs_[fs::relative(p, layout_.root).string()] = git_blob_hash_file(p.string());
}

void Runner::write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + p.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
  }
  fs::rename(tmp, p);
  record_output(p);
}

void Runner::write_run_manifest(const std::string& subcommand) {
  const std::string resolved = config_.resolved_json();
  write_text(layout_.resolved_config(), resolved);
  outputs_.erase(fs::relative(layout_.resolved_config(), layout_.root).string());
  json j = {{"subcommand", subcommand},
            {"config_hash", config_hash(config_)},
            {"config", json::parse(resolved)},
            {"inputs", inputs_},
            {"outputs", outputs_}};
  const fs::path p = layout_.run_manifest(subcommand);
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << j.dump(2) << "\n";
}

void Runner::run(const std::string& subcommand) {
  using Step = void (Runner::*)();
  static const std::map<std::string, Step> steps = {
      {"synth", &Runner::synth},
      {"render", &Runner::render},
      {"train-stage1", &Runner::train_stage1},
      {"train-stage2", &Runner::train_stage2},
      {"train-stage3", &Runner::train_stage3},
      {"train-stage4", &Runner::train_stage4},
      {"build-index", &Runner::build_index},
      {"reconstruct", &Runner::reconstruct},
  };
  fs::create_directories(layout_.root);
  inputs_.clear();
  outputs_.clear();
  if (subcommand == "serve") {
    serve();
    return;
  }
  OutputLock lock(layout_.lock());
  if (auto it = steps.find(subcommand); it != steps.end()) {
    (this->*(it->second))();
  } else if (subcommand == "evaluate") {
    for (const auto& r : evaluate()) std::cout << r.to_table();
  } else if (subcommand == "amt-eval") {
    for (const auto& r : amt_eval()) std::cout << r.to_table();
  } else {
    throw ConfigError("unknown subcommand '" + subcommand + "'");
  }
  write_run_manifest(subcommand);
}

// ---------------------------------------------------------------- corpus

void Runner::synth() {
  manifest_ = std::make_unique<corpus::DatasetManifest>(corpus::synthesize_corpus(config_.corpus_options()));
  store_.reset();
  const auto& m = *manifest_;
  write_text(layout_.manifest(), corpus::manifest_to_json(m));
  for (const std::string split : {"val", "test"}) {
    const auto qs = corpus::build_query_sets(m, config_.query_seed(), config_.query_options(split_from_string(split)));
    write_text(layout_.queries(split, corpus::QueryKind::kSingleFull), corpus::query_set_to_jsonl(qs.single_full));
    write_text(layout_.queries(split, corpus::QueryKind::kSingleTop), corpus::query_set_to_jsonl(qs.single_top));
    write_text(layout_.queries(split, corpus::QueryKind::kMulti), corpus::query_set_to_jsonl(qs.multi));
  }
  const auto groups = corpus::build_amt_groups(m, config_.queries.amt_groups, config_.query_seed() + 1,
                                               config_.queries.top_k, corpus::Split::kTest);
  write_text(layout_.amt_groups(), corpus::groups_to_jsonl(groups.groups));
  log_line("synth", std::to_string(m.fonts.size()) + " fonts, " + std::to_string(m.vocabulary.size()) + " tags, " +
                        std::to_string(groups.groups.size()) + " forced-choice groups");
}

void Runner::render() {
  auto& m = manifest();
  for (const auto& f : m.fonts)
    for (char c : corpus::kGlyphSet) {
      write_text(layout_.glyphs() / corpus::glyph_filename(f.font_id, c),
                 corpus::encode_png(store().glyph(f.font_id, c)));
    }
  log_line("render", std::to_string(m.fonts.size() * corpus::kNumGlyphs) + " glyph images");
}

// ---------------------------------------------------------------- training

void Runner::train_stage1() {
  auto& m = manifest();
  const auto r = recognizer::train_stage1(m, store(), config_.backbone, config_.stage1);
  nn::Checkpoint ck;
  r.model.save(ck);
  write_text(layout_.checkpoint(1), ck.serialize());
  write_text(layout_.log("stage1"), recognizer::log_to_csv(r.log));
  if (!r.log.empty()) log_line("train-stage1", "final train loss " + std::to_string(r.log.back().loss));
}

namespace {

const nn::Checkpoint& load_ckpt(std::map<int, nn::Checkpoint>& cache, const Layout& layout, int stage) {
  auto it = cache.find(stage);
  if (it != cache.end()) return it->second;
  require(layout.checkpoint(stage), "train-stage" + std::to_string(stage));
  return cache.emplace(stage, nn::Checkpoint::load(layout.checkpoint(stage).string())).first->second;
}

}  // namespace

void Runner::train_stage2() {
  auto& m = manifest();
  const auto& ck1 = load_ckpt(models_->ckpts, layout_, 1);
  record_input(layout_.checkpoint(1));
  const auto rec = TagRecognizer::load(ck1, m.vocabulary);
  auto r = genfeat::train_stage2(rec, m, store(), config_.gan, config_.stage2, config_.stage1);
  nn::Checkpoint ck;
  r.model.save(ck);
  r.gan.save(ck);
  ck.set_text("stage2.summary", json{{"initial_probe_l1", r.initial_probe_l1},
                                     {"phase_a_probe_l1", r.phase_a_probe_l1},
                                     {"phase_a_epochs", r.phase_a_epochs},
                                     {"phase_a_converged", r.phase_a_converged}}
                                    .dump());
  write_text(layout_.checkpoint(2), ck.serialize());
  write_text(layout_.log("stage2"), recognizer::log_to_csv(r.log));

  // reconstructions of a few train glyphs with every feature node kept
  std::vector<corpus::GlyphImage> real, fake;
  const std::vector<Scalar> ones(static_cast<std::size_t>(r.model.feature_dim()), 1.0);
  const auto& train = m.splits.train;
  for (std::size_t i = 0; i < std::min<std::size_t>(6, train.size()); ++i) {
    const char c = corpus::kGlyphSet[(i * 11) % corpus::kGlyphSet.size()];
    const auto& img = store().glyph(train[i], c);
    const auto feat = r.model.extract_features(recognizer::images_to_tensor({&img}));
    real.push_back(img);
    fake.push_back(genfeat::masked_reconstruction(r.gan, feat.slice(0), ones, r.model.feature_dim(),
                                                  genfeat::MaskMode::kTop, store(), c));
  }
  if (!real.empty()) write_text(layout_.root / "stage2_samples.png", genfeat::sample_sheet_png(real, fake));
  log_line("train-stage2", "probe L1 " + std::to_string(r.initial_probe_l1) + " -> " +
                               std::to_string(r.phase_a_probe_l1) + " after " + std::to_string(r.phase_a_epochs) +
                               " phase-A epochs");
}

void Runner::train_stage3() {
  auto& m = manifest();
  const auto& ck2 = load_ckpt(models_->ckpts, layout_, 2);
  record_input(layout_.checkpoint(2));
  const auto rec = TagRecognizer::load(ck2, m.vocabulary);

  recognizer::FontClassifier fc;
  if (fs::exists(layout_.font_classifier())) {
    fc = recognizer::FontClassifier::load(nn::Checkpoint::load(layout_.font_classifier().string()));
    if (fc.font_ids() != m.splits.train || !(fc.backbone().config() == config_.backbone)) {
      throw ConfigError(layout_.font_classifier().string() +
                        " does not match the current train split or backbone; delete it to retrain");
    }
    record_input(layout_.font_classifier());
  } else {
    auto r = recognizer::train_font_classifier(m, store(), config_.backbone, config_.font_classifier);
    nn::Checkpoint ck;
    r.model.save(ck);
    write_text(layout_.font_classifier(), ck.serialize());
    write_text(layout_.log("font_classifier"), recognizer::log_to_csv(r.log));
    log_line("train-stage3", "font classifier held-out accuracy " + std::to_string(r.best_holdout_accuracy));
    fc = std::move(r.model);
  }

  auto r = attention::train_stage3(rec, fc, m, store(), config_.attention);
  nn::Checkpoint ck;
  r.model.save(ck);
  r.module.save(ck);
  fc.save(ck);
  ck.merge_from(ck2);
  write_text(layout_.checkpoint(3), ck.serialize());
  write_text(layout_.log("stage3"), recognizer::log_to_csv(r.log));
  if (!r.log.empty()) log_line("train-stage3", "final train loss " + std::to_string(r.log.back().loss));
}

void Runner::train_stage4() {
  auto& m = manifest();
  const auto& ck3 = load_ckpt(models_->ckpts, layout_, 3);
  record_input(layout_.checkpoint(3));
  auto rec = TagRecognizer::load(ck3, m.vocabulary);
  auto fc = recognizer::FontClassifier::load(ck3);
  auto module = attention::AttentionModule::load(ck3);
  const auto bank = attention::compute_attended_probabilities(rec, fc, module, store(), m.splits.train);
  auto r = retrieval::train_stage4(bank, m, config_.retrieval);
  nn::Checkpoint ck;
  r.head.save(ck);
  ck.merge_from(ck3);
  write_text(layout_.checkpoint(4), ck.serialize());
  write_text(layout_.log("stage4"), recognizer::log_to_csv(r.log));
  if (!r.log.empty()) {
    log_line("train-stage4", "final ranking loss " + std::to_string(r.log.back().loss) + ", triplet accuracy " +
                                 std::to_string(r.log.back().metric));
  }
}

// ---------------------------------------------------------------- evaluation

namespace {

struct VariantBank {
  GlyphBank bank;
  const retrieval::AffinityHead* head = nullptr;  // set for the full variant
};

}  // namespace

// Per-glyph probabilities of `ids` under a model variant.
static VariantBank variant_bank(const std::string& variant, const std::vector<std::string>& ids,
                                corpus::DatasetManifest& m, corpus::GlyphStore& store, const Layout& layout,
                                std::map<int, nn::Checkpoint>& ckpts, std::map<int, TagRecognizer>& recs,
                                std::optional<recognizer::FontClassifier>& fc,
                                std::optional<attention::AttentionModule>& module,
                                std::optional<retrieval::AffinityHead>& head) {
  auto rec = [&](int stage) -> TagRecognizer& {
    auto it = recs.find(stage);
    if (it == recs.end()) it = recs.emplace(stage, TagRecognizer::load(load_ckpt(ckpts, layout, stage), m.vocabulary)).first;
    return it->second;
  };
  if (variant == "basic") return {recognizer::compute_tag_probabilities(rec(1), store, ids)};
  if (variant == "gan") return {recognizer::compute_tag_probabilities(rec(2), store, ids)};
  if (variant == "full" && !head) head = retrieval::AffinityHead::load(load_ckpt(ckpts, layout, 4));
  const auto& ck3 = load_ckpt(ckpts, layout, 3);
  if (!fc) fc = recognizer::FontClassifier::load(ck3);
  if (!module) module = attention::AttentionModule::load(ck3);
  VariantBank out{attention::compute_attended_probabilities(rec(3), *fc, *module, store, ids)};
  if (variant == "full") out.head = &*head;
  return out;
}

std::vector<eval::MetricReport> Runner::evaluate() {
  auto& m = manifest();
  const std::string split = config_.eval.split;
  const auto& ids = m.splits.of(split_from_string(split));
  std::vector<corpus::QuerySet> sets;
  for (auto kind : kKinds) {
    const auto p = layout_.queries(split, kind);
    require(p, "synth");
    sets.push_back(corpus::load_query_set(p.string()));
    record_input(p);
  }
  std::vector<eval::MetricReport> reports;
  for (const auto& variant : config_.eval.variants) {
    eval::Scorer scorer;
    std::optional<VariantBank> vb;
    if (variant == "oracle") {
      scorer = [&](const retrieval::QueryVector& q) {
        std::vector<double> s;
        for (const auto& id : ids) {
          bool all = true;
          for (const auto& t : q.tags) all = all && m.has_tag(m.font(id), t);
          s.push_back(all ? 1.0 : 0.0);
        }
        return s;
      };
    } else {
      vb = variant_bank(variant, ids, m, store(), layout_, models_->ckpts, models_->recs, models_->font_model,
                        models_->module, models_->head);
      scorer = [&vb](const retrieval::QueryVector& q) {
        return vb->head ? retrieval::score_fonts(vb->bank, q, *vb->head) : retrieval::product_scores(vb->bank, q);
      };
    }
    eval::MetricReport report{variant, {}, std::nullopt};
    for (const auto& qs : sets) report.sets.push_back(eval::evaluate_query_set(qs, scorer, m, ids));
    const fs::path base = layout_.metrics() / (split + "_" + variant);
    write_text(base.string() + ".json", report.to_json());
    write_text(base.string() + ".txt", report.to_table());
    write_text(base.string() + "_queries.csv", report.per_query_csv());
    reports.push_back(std::move(report));
  }
  for (const auto& [stage, ck] : models_->ckpts) record_input(layout_.checkpoint(stage));
  return reports;
}

std::vector<eval::MetricReport> Runner::amt_eval() {
  auto& m = manifest();
  require(layout_.amt_groups(), "synth");
  const auto groups = corpus::groups_from_jsonl(read_file(layout_.amt_groups()));
  record_input(layout_.amt_groups());
  const auto& ids = m.splits.test;
  std::vector<eval::MetricReport> reports;
  for (const auto& variant : config_.eval.variants) {
    eval::GroupScorer scorer;
    std::vector<std::vector<Scalar>> means;
    if (variant == "oracle") {
      scorer = eval::parameter_oracle_scorer(m);
    } else {
      const auto vb = variant_bank(variant, ids, m, store(), layout_, models_->ckpts, models_->recs,
                                   models_->font_model, models_->module, models_->head);
      means = recognizer::font_means(vb.bank);
      scorer = [&](const std::string& tag, const std::vector<std::string>& candidates) {
        const auto k = m.vocabulary.index_of(tag);
        if (!k) throw InvalidArgument("amt group tag '" + tag + "' is not in the vocabulary");
        std::vector<double> s;
        for (const auto& id : candidates) {
          const auto pos = std::find(ids.begin(), ids.end(), id) - ids.begin();
          if (pos == static_cast<long>(ids.size())) throw InvalidArgument("amt candidate " + id + " is not a test font");
          s.push_back(means[static_cast<std::size_t>(pos)][*k]);
        }
        return s;
      };
    }
    eval::MetricReport report{variant, {}, eval::amt_eval(groups, scorer)};
    const fs::path base = layout_.metrics() / ("amt_" + variant);
    write_text(base.string() + ".json", report.to_json());
    write_text(base.string() + ".txt", report.to_table());
    reports.push_back(std::move(report));
  }
  for (const auto& [stage, ck] : models_->ckpts) record_input(layout_.checkpoint(stage));
  return reports;
}

// ---------------------------------------------------------------- serving

namespace {

std::string model_version(const Layout& layout) {
  return sha1_hex(git_blob_hash_file(layout.checkpoint(1).string()) + git_blob_hash_file(layout.checkpoint(4).string()));
}

}  // namespace

void Runner::build_index() {
  auto& m = manifest();
  require(layout_.checkpoint(1), "train-stage1");
  require(layout_.checkpoint(4), "train-stage4");
  const auto& ck1 = load_ckpt(models_->ckpts, layout_, 1);
  const auto& ck4 = load_ckpt(models_->ckpts, layout_, 4);
  record_input(layout_.checkpoint(1));
  record_input(layout_.checkpoint(4));
  auto basic = TagRecognizer::load(ck1, m.vocabulary);
  auto full = TagRecognizer::load(ck4, m.vocabulary);
  auto fc = recognizer::FontClassifier::load(ck4);
  auto module = attention::AttentionModule::load(ck4);
  const auto ix = service::build_index(m, store(), basic, full, fc, module, model_version(layout_));
  write_text(layout_.index(), ix.serialize());
  log_line("build-index", std::to_string(ix.n_fonts()) + " fonts indexed");
}

void Runner::serve(const std::function<void(int)>& on_ready) {
  auto& m = manifest();
  require(layout_.index(), "build-index");
  require(layout_.checkpoint(4), "train-stage4");
  auto ix = service::FontIndex::load(layout_.index().string());
  if (ix.model_version != model_version(layout_)) {
    throw MissingPrerequisite("index.bin is older than the current checkpoints", "build-index");
  }
  if (ix.vocab_hash != m.vocabulary.hash()) {
    throw MissingPrerequisite("index.bin was built for another vocabulary", "build-index");
  }
  auto head = retrieval::AffinityHead::load(nn::Checkpoint::load(layout_.checkpoint(4).string()));
  service::SearchService svc(std::move(ix), std::move(head), m, layout_.previews().string());
  service::HttpServer server(svc);
  const int port = server.bind(config_.serve.host, config_.serve.port);
  log_line("serve", "listening on http://" + config_.serve.host + ":" + std::to_string(port));
  if (on_ready) {
    std::thread t([&] {
      server.wait_until_ready();
      on_ready(port);
      server.stop();
    });
    server.listen();
    t.join();
  } else {
    server.listen();
  }
}

// ---------------------------------------------------------------- diagnostics

void Runner::reconstruct() {
  auto& m = manifest();
  const auto& ck3 = load_ckpt(models_->ckpts, layout_, 3);
  record_input(layout_.checkpoint(3));
  auto rec = TagRecognizer::load(ck3, m.vocabulary);
  auto fc = recognizer::FontClassifier::load(ck3);
  auto module = attention::AttentionModule::load(ck3);
  auto gan = genfeat::GanModel::load(ck3);
  const std::string font = config_.reconstruct.font.empty() ? m.splits.test.at(0) : config_.reconstruct.font;
  m.font(font);
  const char c = config_.reconstruct.glyph[0], cross = config_.reconstruct.cross_glyph[0];
  const int D = rec.feature_dim();
  const int k = config_.reconstruct.k > 0 ? config_.reconstruct.k : std::max(1, D / 4);

  const auto& img = store().glyph(font, c);
  const auto& other = store().glyph(font, cross);
  const auto x = recognizer::images_to_tensor({&img, &other});
  const auto feats = rec.extract_features(x);
  const auto maps = module.forward(fc.predict(x));
  const auto feature = feats.slice(0);
  const auto own = maps.slice(0), foreign = maps.slice(1);
  const std::vector<Scalar> ones(static_cast<std::size_t>(D), 1.0);

  struct Row {
    std::string name;
    corpus::GlyphImage image;
  };
  std::vector<Row> rows = {
      {"all", genfeat::masked_reconstruction(gan, feature, ones, D, genfeat::MaskMode::kTop, store(), c)},
      {"top", genfeat::masked_reconstruction(gan, feature, own, k, genfeat::MaskMode::kTop, store(), c)},
      {"bottom", genfeat::masked_reconstruction(gan, feature, own, k, genfeat::MaskMode::kBottom, store(), c)},
      {"cross", genfeat::masked_reconstruction(gan, feature, foreign, k, genfeat::MaskMode::kCross, store(), c)},
  };
  std::vector<corpus::GlyphImage> real, fake;
  json l1;
  for (const auto& r : rows) {
    double sum = 0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) sum += std::abs(img.pixels[i] - r.image.pixels[i]);
    l1[r.name] = sum / static_cast<double>(img.pixels.size());
    real.push_back(img);
    fake.push_back(r.image);
  }
  const std::string stem = font + "_" + std::to_string(static_cast<int>(c)) + "_k" + std::to_string(k);
  write_text(layout_.reconstructions() / (stem + ".png"), genfeat::sample_sheet_png(real, fake));
  write_text(layout_.reconstructions() / (stem + ".json"),
             json{{"font", font}, {"glyph", std::string(1, c)}, {"cross_glyph", std::string(1, cross)}, {"k", k},
                  {"rows", {"all", "top", "bottom", "cross"}}, {"l1", l1}}
                 .dump(2));
  log_line("reconstruct", "L1 all/top/bottom/cross: " + l1.dump());
}

}  // namespace tagfont::pipeline

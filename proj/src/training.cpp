#include "listreader/training.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "listreader/rng.hpp"

namespace listreader {

using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 1 || max_epochs < 1 || early_stop_patience < 1 || vocab_min_count < 1)
    throw ConfigError("train config: batch_size/max_epochs/early_stop_patience/vocab_min_count "
                      "must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be positive");
  if (lambda < 0.0) throw ConfigError("train config: lambda must be non-negative");
  forward_options_for(ablation);  // throws on unknown names
  model.validate();
}

bool EarlyStopper::update(double val_loss, int epoch) {
  improved_ = !has_best_ || val_loss < best_;
  if (improved_) {
    has_best_ = true;
    best_ = val_loss;
    best_epoch_ = epoch;
    count_ = 0;
  } else {
    ++count_;
  }
  return count_ < patience_;
}

namespace {

std::string loss_mode_name(LossMode mode) {
  switch (mode) {
    case LossMode::kSpanOnly:
      return "span_only";
    case LossMode::kSentenceOnly:
      return "sentence_only";
    case LossMode::kJoint:
      break;
  }
  return "joint";
}

struct PassResult {
  double mean_loss = 0.0;
  EvalResult eval;
};

// One no-grad sweep computing loss and both F1 metrics from a single forward
// pass per example.
PassResult scored_pass(const ListReaderModel& model, const std::vector<Example>& data,
                       const ForwardOptions& opts, double lambda, LossMode mode) {
  NoGradGuard no_grad;
  PassResult out;
  for (const Example& raw : data) {
    const Example ex = model.fit_example(raw);
    const ListReaderModel::Forward fwd = model.forward(ex, opts);
    out.mean_loss +=
        joint_loss(fwd.tag_probs, fwd.sentence_probs, spans_to_bio(ex), lambda, mode).value();
    EvalResult::PerExample per;
    per.id = ex.id;
    per.prediction = decode_bio(fwd.tag_probs, sentence_scores(fwd.sentence_probs), ex);
    per.span_f1 = span_f1(per.prediction.spans, ex.answers);
    per.sent_f1 = sentence_f1(per.prediction.answer_sentences, ex.answer_sentences());
    out.eval.span_f1 += per.span_f1;
    out.eval.sent_f1 += per.sent_f1;
    out.eval.examples.push_back(std::move(per));
  }
  const double n = static_cast<double>(data.size());
  if (n > 0) {
    out.mean_loss /= n;
    out.eval.span_f1 /= n;
    out.eval.sent_f1 /= n;
  }
  return out;
}

void diagnose_divergence(const ListReaderModel& model, const Example& ex, double lambda,
                         LossMode mode, const ForwardOptions& opts, int epoch) {
  const std::string where =
      "training diverged at epoch " + std::to_string(epoch) + " on example " + ex.id;
  FiniteCheckGuard check;
  NoGradGuard no_grad;
  try {
    model.loss(ex, lambda, mode, opts);
  } catch (const NonFiniteError& e) {
    throw NonFiniteError(where + ": " + e.what());
  }
  throw NonFiniteError(where + " (non-finite loss)");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed for " + path);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RunReport single_run(const TrainConfig& cfg, const std::vector<Example>& train_set,
                     const std::vector<Example>& val_set, const std::string& out_dir,
                     LossMode mode, const std::string& tag, std::string* checkpoint_out) {
  const auto t0 = std::chrono::steady_clock::now();
  const ForwardOptions opts = forward_options_for(cfg.ablation);

  const Vocab vocab = Vocab::build(train_set, cfg.vocab_min_count);
  ListReaderModel model(cfg.model, vocab, cfg.seed);

  std::vector<Example> train;
  train.reserve(train_set.size());
  for (const Example& ex : train_set) train.push_back(model.fit_example(ex));

  ModelMeta meta;
  meta.model = cfg.model;
  meta.vocab_tokens.assign(vocab.id_to_token.begin() + 4, vocab.id_to_token.end());
  meta.ablation = cfg.ablation;
  meta.lambda = cfg.lambda;
  const std::string meta_json = meta_to_json(meta);

  const std::string ckpt_path = (std::filesystem::path(out_dir) / (tag + ".ckpt")).string();
  AdamState adam;
  adam.learning_rate = cfg.learning_rate;

  RunReport report;
  report.seed = cfg.seed;
  report.ablation = cfg.ablation;
  report.loss_mode = loss_mode_name(mode);
  report.checkpoint_path = ckpt_path;

  Rng shuffle_rng(cfg.seed);
  std::vector<int> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  EarlyStopper stopper(cfg.early_stop_patience);
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t cursor = 0;
    while (cursor < order.size()) {
      const std::size_t batch_end =
          std::min(cursor + static_cast<std::size_t>(cfg.batch_size), order.size());
      const double batch_count = static_cast<double>(batch_end - cursor);
      model.params().zero_grad();
      for (std::size_t i = cursor; i < batch_end; ++i) {
        const Example& ex = train[order[i]];
        const Tensor loss = model.loss(ex, cfg.lambda, mode, opts);
        const double v = loss.value();
        if (!std::isfinite(v)) diagnose_divergence(model, ex, cfg.lambda, mode, opts, epoch);
        loss_sum += v;
        scale(loss, 1.0 / batch_count).backward();
      }
      adam_step(adam, model.params());
      cursor = batch_end;
    }

    const PassResult val = scored_pass(model, val_set, opts, cfg.lambda, mode);
    if (!std::isfinite(val.mean_loss))
      throw NonFiniteError("training diverged at epoch " + std::to_string(epoch) +
                           " (non-finite validation loss)");
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(train.size());
    stats.val_loss = val.mean_loss;
    stats.val_span_f1 = val.eval.span_f1;
    stats.val_sent_f1 = val.eval.sent_f1;
    report.history.push_back(stats);

    const bool keep_going = stopper.update(val.mean_loss, epoch);
    if (stopper.improved_last_update())
      save_checkpoint(ckpt_path, model.params(), &adam, meta_json);
    if (!keep_going) break;
  }

  report.best_epoch = stopper.best_epoch();
  report.best_val_loss = stopper.best();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::string csv = "epoch,train_loss,val_loss,val_span_f1,val_sent_f1\n";
  for (const EpochStats& s : report.history)
    csv += std::to_string(s.epoch) + "," + format_double(s.train_loss) + "," +
           format_double(s.val_loss) + "," + format_double(s.val_span_f1) + "," +
           format_double(s.val_sent_f1) + "\n";
  write_text((std::filesystem::path(out_dir) / (tag + "_loss.csv")).string(), csv);
  write_text((std::filesystem::path(out_dir) / (tag + "_report.json")).string(),
             report_to_json(report));
  if (checkpoint_out) *checkpoint_out = ckpt_path;
  return report;
}

}  // namespace

std::string report_to_json(const RunReport& report) {
  json j;
  j["checkpoint"] = report.checkpoint_path;
  j["seed"] = report.seed;
  j["ablation"] = report.ablation;
  j["loss_mode"] = report.loss_mode;
  j["best_epoch"] = report.best_epoch;
  j["best_val_loss"] = report.best_val_loss;
  j["wall_seconds"] = report.wall_seconds;
  j["epochs"] = json::array();
  for (const EpochStats& s : report.history)
    j["epochs"].push_back({{"epoch", s.epoch},
                           {"train_loss", s.train_loss},
                           {"val_loss", s.val_loss},
                           {"val_span_f1", s.val_span_f1},
                           {"val_sent_f1", s.val_sent_f1}});
  return j.dump(2) + "\n";
}

TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const std::string& out_dir) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw ValidationError("training needs non-empty train and validation sets");
  if (out_dir.empty()) throw ConfigError("training needs an output directory");
  std::filesystem::create_directories(out_dir);

  TrainResult result;
  if (cfg.ablation == "separate_train") {
    std::string span_ckpt, sent_ckpt;
    result.runs.push_back(
        single_run(cfg, train_set, val_set, out_dir, LossMode::kSpanOnly, "model_span",
                   &span_ckpt));
    result.runs.push_back(
        single_run(cfg, train_set, val_set, out_dir, LossMode::kSentenceOnly, "model_sent",
                   &sent_ckpt));
    result.checkpoints = {span_ckpt, sent_ckpt};
    return result;
  }
  std::string ckpt;
  result.runs.push_back(
      single_run(cfg, train_set, val_set, out_dir, LossMode::kJoint, "model", &ckpt));
  result.checkpoints = {ckpt};
  return result;
}

EvalResult evaluate(const ListReaderModel& model, const std::vector<Example>& data,
                    const ForwardOptions& opts) {
  return scored_pass(model, data, opts, 0.0, LossMode::kJoint).eval;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  const CheckpointData ckpt = read_checkpoint(checkpoint_path);
  ModelMeta meta = meta_from_json(ckpt.meta_json);
  const Vocab vocab = Vocab::from_tokens(meta.vocab_tokens);
  LoadedModel loaded{ListReaderModel(meta.model, vocab, 0), std::move(meta)};
  load_checkpoint_into(ckpt, loaded.model.params(), nullptr);
  return loaded;
}

EvalResult evaluate_checkpoint(const std::string& checkpoint_path,
                               const std::vector<Example>& data) {
  const LoadedModel loaded = load_model(checkpoint_path);
  return evaluate(loaded.model, data, forward_options_for(loaded.meta.ablation));
}

std::string ablation_table_to_json(const AblationTable& table) {
  json j;
  j["seeds"] = table.seeds;
  j["rows"] = json::array();
  for (const AblationRow& row : table.rows)
    j["rows"].push_back({{"name", row.name},
                         {"span_f1", row.span_f1s},
                         {"sent_f1", row.sent_f1s},
                         {"mean_span_f1", row.mean_span_f1},
                         {"mean_sent_f1", row.mean_sent_f1}});
  return j.dump(2) + "\n";
}

AblationTable run_ablation_suite(const TrainConfig& base, const std::vector<Example>& train_set,
                                 const std::vector<Example>& val_set,
                                 const std::vector<Example>& test_set,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::string& out_dir) {
  if (seeds.empty()) throw ConfigError("ablation suite needs at least one seed");
  if (test_set.empty()) throw ValidationError("ablation suite needs a non-empty test set");
  std::filesystem::create_directories(out_dir);

  AblationTable table;
  table.seeds = seeds;
  const std::vector<std::string> variants = {"none", "no_graph", "no_align", "separate_train"};
  for (const std::string& variant : variants) {
    AblationRow row;
    row.name = variant == "none" ? "full" : variant;
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      TrainConfig cfg = base;
      cfg.ablation = variant;
      cfg.seed = seeds[si];
      const std::string run_dir =
          (std::filesystem::path(out_dir) / (row.name + "_seed" + std::to_string(seeds[si])))
              .string();
      const TrainResult trained = train(cfg, train_set, val_set, run_dir);
      if (variant == "separate_train") {
        row.span_f1s.push_back(evaluate_checkpoint(trained.checkpoints[0], test_set).span_f1);
        row.sent_f1s.push_back(evaluate_checkpoint(trained.checkpoints[1], test_set).sent_f1);
      } else {
        const EvalResult eval = evaluate_checkpoint(trained.checkpoints[0], test_set);
        row.span_f1s.push_back(eval.span_f1);
        row.sent_f1s.push_back(eval.sent_f1);
      }
    }
    for (double v : row.span_f1s) row.mean_span_f1 += v / static_cast<double>(seeds.size());
    for (double v : row.sent_f1s) row.mean_sent_f1 += v / static_cast<double>(seeds.size());
    table.rows.push_back(std::move(row));
  }
  write_text((std::filesystem::path(out_dir) / "ablation.json").string(),
             ablation_table_to_json(table));
  return table;
}

}  // namespace listreader

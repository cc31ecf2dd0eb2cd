#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "listreader/extractor.hpp"
#include "listreader/model.hpp"
#include "listreader/text.hpp"

namespace listreader {

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 1e-4;
  double lambda = 2.0;
  int max_epochs = 200;
  int early_stop_patience = 10;  // counted in validation evaluations (one per epoch)
  std::uint64_t seed = 1;
  std::string ablation = "none";  // none | no_graph | no_align | separate_train
  int vocab_min_count = 1;
  ModelConfig model;

  void validate() const;
};

// Patience counting for validation-loss early stopping, exposed for direct
// testing. update() returns true while training should continue.
struct EarlyStopper {
  explicit EarlyStopper(int patience) : patience_(patience) {}
  bool update(double val_loss, int epoch);
  bool improved_last_update() const { return improved_; }
  double best() const { return best_; }
  int best_epoch() const { return best_epoch_; }
  int evaluations_past_best() const { return count_; }

 private:
  int patience_;
  double best_ = 0.0;
  bool has_best_ = false;
  bool improved_ = false;
  int best_epoch_ = 0;
  int count_ = 0;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_span_f1 = 0.0;
  double val_sent_f1 = 0.0;
};

struct RunReport {
  std::vector<EpochStats> history;
  std::string checkpoint_path;
  std::uint64_t seed = 0;
  std::string ablation = "none";
  std::string loss_mode = "joint";  // joint | span_only | sentence_only
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double wall_seconds = 0.0;
};

std::string report_to_json(const RunReport& report);

struct TrainResult {
  std::vector<RunReport> runs;           // one run, or span+sentence for separate_train
  std::vector<std::string> checkpoints;  // parallel to runs
};

// Deterministic in (config, data, seed). Writes the best-validation-loss
// checkpoint (with rebuild metadata), a report JSON, and a loss CSV into
// out_dir (required). separate_train becomes two independent runs.
TrainResult train(const TrainConfig& cfg, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set, const std::string& out_dir);

struct EvalResult {
  double span_f1 = 0.0;
  double sent_f1 = 0.0;
  struct PerExample {
    std::string id;
    double span_f1 = 0.0;
    double sent_f1 = 0.0;
    AnswerList prediction;
  };
  std::vector<PerExample> examples;
};

EvalResult evaluate(const ListReaderModel& model, const std::vector<Example>& data,
                    const ForwardOptions& opts);

// Rebuilds the model recorded in the checkpoint's metadata and evaluates it
// with that run's ablation flags.
struct LoadedModel {
  ListReaderModel model;
  ModelMeta meta;
};
LoadedModel load_model(const std::string& checkpoint_path);
EvalResult evaluate_checkpoint(const std::string& checkpoint_path,
                               const std::vector<Example>& data);

struct AblationRow {
  std::string name;
  std::vector<double> span_f1s;  // one per seed
  std::vector<double> sent_f1s;
  double mean_span_f1 = 0.0;
  double mean_sent_f1 = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // full, no_graph, no_align, separate_train
  std::vector<std::uint64_t> seeds;
};

std::string ablation_table_to_json(const AblationTable& table);

// Trains every variant with the same seeds and data and scores the test set.
// separate_train reports span F1 from its span run and sentence F1 from its
// sentence run.
AblationTable run_ablation_suite(const TrainConfig& base, const std::vector<Example>& train_set,
                                 const std::vector<Example>& val_set,
                                 const std::vector<Example>& test_set,
                                 const std::vector<std::uint64_t>& seeds,
                                 const std::string& out_dir);

}  // namespace listreader

#include "listreader/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "listreader/config.hpp"
#include "listreader/synth.hpp"
#include "listreader/training.hpp"

namespace listreader {

using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit_error(const std::string& type, const std::string& message) {
  json j;
  j["type"] = type;
  j["error"] = message;
  std::cerr << j.dump() << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os << text;
  if (!os) throw IoError("write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  std::stringstream buffer;
  buffer << is.rdbuf();
  return buffer.str();
}

std::uint64_t seed_from_env(std::uint64_t fallback) {
  const char* env = std::getenv("LISTREADER_SEED");
  if (!env || !*env) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(env, &used);
    if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ValidationError(std::string("LISTREADER_SEED is not an unsigned integer: ") + env);
  }
}

json prediction_json(const EvalResult::PerExample& per, bool with_metrics) {
  json spans = json::array();
  for (std::size_t i = 0; i < per.prediction.spans.size(); ++i) {
    const Span& s = per.prediction.spans[i];
    spans.push_back({{"sent", s.sentence},
                     {"start", s.start},
                     {"end", s.end},
                     {"text", per.prediction.span_texts[i]}});
  }
  json j;
  j["id"] = per.id;
  j["spans"] = spans;
  j["answer_sentences"] = per.prediction.answer_sentences;
  j["span_f1"] = with_metrics ? json(per.span_f1) : json(nullptr);
  j["sent_f1"] = with_metrics ? json(per.sent_f1) : json(nullptr);
  return j;
}

int cmd_gen(const std::string& mode, int count, std::uint64_t seed, const std::string& out,
            const GenConfig& knobs) {
  GenConfig cfg = knobs;
  cfg.mode = gen_mode_from_string(mode);
  const std::vector<Example> examples = generate_synthetic(cfg, seed, count);
  save_jsonl(examples, out);
  const CorpusStats stats = corpus_stats(examples);
  json j;
  j["out"] = out;
  j["examples"] = stats.examples;
  j["mean_sentences"] = stats.mean_sentences;
  j["mean_spans"] = stats.mean_spans;
  j["mean_answer_sentences"] = stats.mean_answer_sentences;
  j["mean_question_tokens"] = stats.mean_question_tokens;
  j["mean_passage_tokens"] = stats.mean_passage_tokens;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& val_path, const std::string& out_dir,
              const std::string& ablation_override) {
  AppConfig cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
  if (!ablation_override.empty()) cfg.training.ablation = ablation_override;
  cfg.training.seed = seed_from_env(cfg.training.seed);
  cfg.training.validate();

  const std::vector<Example> train_set = load_jsonl(data_path);
  const std::vector<Example> val_set = load_jsonl(val_path);
  std::filesystem::create_directories(out_dir);
  write_text((std::filesystem::path(out_dir) / "config.json").string(), config_to_json(cfg));

  const TrainResult result = train(cfg.training, train_set, val_set, out_dir);
  json j;
  j["checkpoints"] = result.checkpoints;
  j["ablation"] = cfg.training.ablation;
  j["seed"] = cfg.training.seed;
  json runs = json::array();
  for (const RunReport& run : result.runs)
    runs.push_back({{"loss_mode", run.loss_mode},
                    {"epochs", run.history.size()},
                    {"best_epoch", run.best_epoch},
                    {"best_val_loss", run.best_val_loss},
                    {"wall_seconds", run.wall_seconds}});
  j["runs"] = runs;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_path,
             const std::string& out_path) {
  const std::vector<Example> data = load_jsonl(data_path);
  const EvalResult result = evaluate_checkpoint(checkpoint, data);
  std::string lines;
  for (const auto& per : result.examples) lines += prediction_json(per, true).dump() + "\n";
  write_text(out_path, lines);
  json j;
  j["span_f1"] = result.span_f1;
  j["sent_f1"] = result.sent_f1;
  j["examples"] = result.examples.size();
  j["predictions"] = out_path;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& question,
                const std::string& passage_path, bool as_json) {
  Example ex;
  ex.id = "query";
  ex.question = tokenize(question);
  if (ex.question.empty()) throw UsageError("the question has no tokens");
  ex.sentences = split_passage_text(read_text(passage_path));
  if (ex.sentences.empty()) throw UsageError("the passage has no tokens");

  const LoadedModel loaded = load_model(checkpoint);
  NoGradGuard no_grad;
  const Example fitted = loaded.model.fit_example(ex);
  const ListReaderModel::Forward fwd =
      loaded.model.forward(fitted, forward_options_for(loaded.meta.ablation));
  const std::vector<double> scores = sentence_scores(fwd.sentence_probs);
  EvalResult::PerExample per;
  per.id = fitted.id;
  per.prediction = decode_bio(fwd.tag_probs, scores, fitted);

  if (as_json) {
    std::cout << prediction_json(per, false).dump() << "\n";
    return 0;
  }
  if (per.prediction.spans.empty() && per.prediction.answer_sentences.empty()) {
    std::cout << "no answers found\n";
    return 0;
  }
  for (std::size_t i = 0; i < per.prediction.spans.size(); ++i) {
    const Span& s = per.prediction.spans[i];
    std::cout << "span [sentence " << s.sentence << ", tokens " << s.start << "-" << s.end
              << "]: " << per.prediction.span_texts[i] << "\n";
  }
  for (int k : per.prediction.answer_sentences) {
    std::string text;
    for (std::size_t i = 0; i < fitted.sentences[k].size(); ++i) {
      if (i) text += ' ';
      text += fitted.sentences[k][i];
    }
    std::cout << "answer sentence " << k << " (p=" << scores[k] << "): " << text << "\n";
  }
  return 0;
}

int cmd_trace(const std::string& checkpoint, const std::string& data_path,
              const std::string& example_id, const std::string& out_csv) {
  const std::vector<Example> data = load_jsonl(data_path);
  const Example* found = nullptr;
  for (const Example& ex : data)
    if (ex.id == example_id) {
      found = &ex;
      break;
    }
  if (!found) throw ValidationError("example id '" + example_id + "' not in " + data_path);

  const LoadedModel loaded = load_model(checkpoint);
  NoGradGuard no_grad;
  const Example fitted = loaded.model.fit_example(*found);
  ForwardOptions opts = forward_options_for(loaded.meta.ablation);
  opts.trace = true;
  const ListReaderModel::Forward fwd = loaded.model.forward(fitted, opts);

  std::string csv = "label";
  for (std::size_t k = 0; k < fitted.sentences.size(); ++k)
    csv += ",s" + std::to_string(k);
  csv += "\n";
  int rows = 0;
  for (const TraceRow& row : fwd.trace) {
    if (row.label == "E0") continue;  // sublayer rows only
    const std::vector<double> probs = loaded.model.sentence_probabilities(row.s_p);
    csv += row.label;
    for (double p : probs) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", p);
      csv += std::string(",") + buf;
    }
    csv += "\n";
    ++rows;
  }
  write_text(out_csv, csv);
  json j;
  j["out"] = out_csv;
  j["rows"] = rows;
  j["sentences"] = fitted.sentences.size();
  j["example"] = example_id;
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& data_path,
               const std::string& val_path, const std::string& test_path,
               const std::string& out_dir, const std::string& seeds_text) {
  AppConfig cfg = config_path.empty() ? AppConfig{} : load_config(config_path);
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(seeds_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ValidationError("bad seed '" + item + "' in --seeds");
    }
  }
  if (seeds.empty()) throw ValidationError("--seeds has no usable entries");

  const AblationTable table =
      run_ablation_suite(cfg.training, load_jsonl(data_path), load_jsonl(val_path),
                         load_jsonl(test_path), seeds, out_dir);
  std::cout << ablation_table_to_json(table);
  return 0;
}

}  // namespace

std::vector<std::vector<std::string>> split_passage_text(const std::string& text) {
  std::vector<std::vector<std::string>> sentences;
  std::string current;
  auto flush = [&]() {
    const std::vector<std::string> tokens = tokenize(current);
    if (!tokens.empty()) sentences.push_back(tokens);
    current.clear();
  };
  for (char c : text) {
    current += c;
    if (c == '.' || c == '!' || c == '?') flush();
  }
  flush();
  return sentences;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"extractive reader for list-form answers"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  std::string gen_mode;
  int gen_n = 0;
  std::uint64_t gen_seed = 1;
  std::string gen_out;
  GenConfig gen_knobs;
  gen->add_option("--mode", gen_mode, "keyword or relational")->required();
  gen->add_option("--n", gen_n, "number of examples")->required()->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output JSONL path")->required();
  gen->add_option("--vocab-size", gen_knobs.vocab_size, "content word pool size");
  gen->add_option("--min-sentences", gen_knobs.min_sentences, "per passage");
  gen->add_option("--max-sentences", gen_knobs.max_sentences, "per passage");
  gen->add_option("--min-answers", gen_knobs.min_answers, "per example");
  gen->add_option("--max-answers", gen_knobs.max_answers, "per example");

  // train
  auto* tr = app.add_subcommand("train", "train a model");
  std::string tr_config, tr_data, tr_val, tr_out, tr_ablation;
  tr->add_option("--config", tr_config, "JSON config path");
  tr->add_option("--data", tr_data, "training JSONL")->required();
  tr->add_option("--val", tr_val, "validation JSONL")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--ablation", tr_ablation, "none|no_graph|no_align|separate_train");

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint path")->required();
  ev->add_option("--data", ev_data, "dataset JSONL")->required();
  ev->add_option("--out", ev_out, "predictions JSONL path")->required();

  // predict
  auto* pr = app.add_subcommand("predict", "answer one question over a passage file");
  std::string pr_ckpt, pr_question, pr_passage;
  bool pr_json = false;
  pr->add_option("--checkpoint", pr_ckpt, "checkpoint path")->required();
  pr->add_option("--question", pr_question, "question text")->required();
  pr->add_option("--passage", pr_passage, "plain-text passage file")->required();
  pr->add_flag("--json", pr_json, "machine-readable output");

  // trace
  auto* tc = app.add_subcommand("trace", "per-sublayer sentence probabilities as CSV");
  std::string tc_ckpt, tc_data, tc_id, tc_out;
  tc->add_option("--checkpoint", tc_ckpt, "checkpoint path")->required();
  tc->add_option("--data", tc_data, "dataset JSONL")->required();
  tc->add_option("--example-id", tc_id, "example to trace")->required();
  tc->add_option("--out", tc_out, "output CSV path")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "train and score every ablation variant");
  std::string ab_config, ab_data, ab_val, ab_test, ab_out, ab_seeds = "1,2,3";
  ab->add_option("--config", ab_config, "JSON config path");
  ab->add_option("--data", ab_data, "training JSONL")->required();
  ab->add_option("--val", ab_val, "validation JSONL")->required();
  ab->add_option("--test", ab_test, "test JSONL")->required();
  ab->add_option("--out", ab_out, "output directory")->required();
  ab->add_option("--seeds", ab_seeds, "comma-separated seed list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error("usage", e.what());
    return 1;
  }

  try {
    if (app.got_subcommand(gen)) return cmd_gen(gen_mode, gen_n, gen_seed, gen_out, gen_knobs);
    if (app.got_subcommand(tr)) return cmd_train(tr_config, tr_data, tr_val, tr_out, tr_ablation);
    if (app.got_subcommand(ev)) return cmd_eval(ev_ckpt, ev_data, ev_out);
    if (app.got_subcommand(pr)) return cmd_predict(pr_ckpt, pr_question, pr_passage, pr_json);
    if (app.got_subcommand(tc)) return cmd_trace(tc_ckpt, tc_data, tc_id, tc_out);
    if (app.got_subcommand(ab))
      return cmd_ablate(ab_config, ab_data, ab_val, ab_test, ab_out, ab_seeds);
    emit_error("usage", "no command given");
    return 1;
  } catch (const UsageError& e) {
    emit_error("usage", e.what());
    return 1;
  } catch (const ValidationError& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const ConfigError& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const DimensionError& e) {
    emit_error("validation", e.what());
    return 2;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return 3;
  }
}

}  // namespace listreader

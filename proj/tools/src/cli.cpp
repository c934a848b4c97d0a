#include "cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "salm/checkpoint.hpp"
#include "salm/config_file.hpp"
#include "salm/corpus.hpp"
#include "salm/error.hpp"
#include "salm/metrics.hpp"
#include "salm/random.hpp"
#include "salm/sampling.hpp"
#include "salm/synthetic.hpp"
#include "salm/trainer.hpp"
#include "salm/vocabulary.hpp"

namespace salm::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  bool json = false;
  std::optional<std::uint64_t> seed;
};

// Thrown for inputs that are missing or unreadable; maps to exit 1 except
// where a command says otherwise.
struct MissingInput : Error {
  using Error::Error;
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  Common common;
  json summary = json::object();
};

std::ifstream open_input(const fs::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in || fs::is_directory(path))
    throw MissingInput("cannot read " + std::string(what) + " '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

std::vector<Dialogue> read_corpus(const fs::path& path) {
  auto in = open_input(path, "corpus");
  return parse_corpus(in);
}

json accuracy_json(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::string corpus;
  bool lenient = false;
};

int cmd_validate(Context& ctx, const ValidateArgs& a) {
  std::ifstream in(a.corpus, std::ios::binary);
  if (!in || fs::is_directory(a.corpus)) {
    ctx.err << "error: cannot read corpus '" << a.corpus << "'\n";
    ctx.summary["ok"] = false;
    ctx.summary["error"] = "unreadable path";
    return kRuntimeError;
  }
  const ValidationReport report = validate_corpus(in, {a.lenient});
  ctx.summary["ok"] = report.ok();
  ctx.summary["dialogues"] = report.dialogues.size();
  ctx.summary["utterances"] = report.utterance_count();
  ctx.summary["speakers"] = report.distinct_speaker_count();
  json errors = json::array();
  for (const auto& e : report.errors) {
    ctx.err << "error: line " << e.line << ": " << e.message << "\n";
    errors.push_back({{"line", e.line}, {"dialogue_id", e.dialogue_id}, {"message", e.message}});
  }
  json warnings = json::array();
  for (const auto& w : report.warnings) {
    ctx.err << "warning: line " << w.line << ": " << w.message << "\n";
    warnings.push_back({{"line", w.line}, {"dialogue_id", w.dialogue_id}, {"message", w.message}});
  }
  ctx.summary["errors"] = errors;
  ctx.summary["warnings"] = warnings;
  if (!ctx.common.json) {
    ctx.out << "dialogues:  " << report.dialogues.size() << "\n"
            << "utterances: " << report.utterance_count() << "\n"
            << "speakers:   " << report.distinct_speaker_count() << "\n"
            << "errors:     " << report.errors.size() << "\n"
            << "warnings:   " << report.warnings.size() << "\n";
  }
  return report.ok() ? kSuccess : kInputError;
}

// ------------------------------------------------------------------- synth

struct SynthArgs {
  SynthConfig config;
  std::string out;
};

int cmd_synth(Context& ctx, SynthArgs a) {
  if (ctx.common.seed) a.config.seed = *ctx.common.seed;
  const auto corpus = generate_synthetic_corpus(a.config);
  auto out = open_output(a.out);
  write_corpus(out, corpus);
  out.close();
  std::size_t utterances = 0;
  for (const auto& d : corpus) utterances += d.utterances.size();
  ctx.summary["ok"] = true;
  ctx.summary["path"] = a.out;
  ctx.summary["dialogues"] = corpus.size();
  ctx.summary["utterances"] = utterances;
  ctx.summary["speakers"] = a.config.speakers;
  ctx.summary["seed"] = a.config.seed;
  if (!ctx.common.json)
    ctx.out << "wrote " << corpus.size() << " dialogues (" << utterances << " utterances) to "
            << a.out << "\n";
  return kSuccess;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string corpus;
  std::string out;
  std::vector<std::string> overrides;
  std::string resume;
};

ExampleOptions example_options(const TrainConfig& config) {
  return {config.data.min_context, config.model.max_seq_len};
}

int cmd_train(Context& ctx, const TrainArgs& a) {
  std::vector<Setting> settings;
  if (!a.config.empty()) {
    auto in = open_input(a.config, "config");
    settings = read_settings(in);
  }
  for (const auto& o : a.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
    settings.push_back({o.substr(0, eq), o.substr(eq + 1), "--set"});
  }
  if (ctx.common.seed) settings.push_back({"seed", std::to_string(*ctx.common.seed), "--seed"});
  const TrainConfig config = resolve_train_config(settings);

  auto corpus = read_corpus(a.corpus);
  Vocabulary vocab = build_vocabulary(corpus, config.data.min_count, config.data.speaker_slots);
  const ExamplePool pool(std::move(corpus), vocab, example_options(config));

  const fs::path out_dir(a.out);
  fs::create_directories(out_dir);
  vocab.save(out_dir / "vocab.json");
  {
    auto resolved = open_output(out_dir / "config.resolved.txt");
    resolved << format_train_config(config);
  }

  std::optional<Checkpoint> resume;
  if (!a.resume.empty()) {
    open_input(a.resume, "checkpoint");
    resume = load_checkpoint(a.resume);
  }

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochStats& s) {
    if (ctx.common.json) return;
    ctx.err << "epoch " << s.epoch << "/" << config.epochs << "  lm " << s.lm << "  contrastive "
            << s.contrastive << "  total " << s.total;
    if (!std::isnan(s.rank_acc_ctx))
      ctx.err << "  rank_ctx " << s.rank_acc_ctx << "  rank_spk " << s.rank_acc_spk;
    ctx.err << "\n";
  };
  hooks.on_diverged = [&](const Checkpoint& c) {
    save_checkpoint(c, out_dir / "diverged.bin");
    ctx.err << "diagnostic checkpoint written to " << (out_dir / "diverged.bin").string() << "\n";
  };

  const TrainResult result = train(pool, config, hooks, resume ? &*resume : nullptr);
  save_checkpoint(result.checkpoint, out_dir / "checkpoint.bin");
  {
    auto history = open_output(out_dir / "history.csv");
    write_history_csv(history, result.history);
  }

  ctx.summary["ok"] = true;
  ctx.summary["out_dir"] = out_dir.string();
  ctx.summary["examples"] = pool.examples().size();
  ctx.summary["vocab_size"] = vocab.size();
  ctx.summary["parameters"] = result.checkpoint.params.parameter_count();
  ctx.summary["epochs"] = result.checkpoint.epoch;
  json history = json::array();
  for (const auto& s : result.history)
    history.push_back({{"epoch", s.epoch},
                       {"lm", s.lm},
                       {"contrastive", s.contrastive},
                       {"total", s.total},
                       {"rank_acc_ctx", accuracy_json(s.rank_acc_ctx)},
                       {"rank_acc_spk", accuracy_json(s.rank_acc_spk)}});
  ctx.summary["history"] = history;
  if (!ctx.common.json) {
    ctx.out << "trained " << pool.examples().size() << " examples for "
            << result.checkpoint.epoch << " epochs; outputs in " << out_dir.string() << "\n";
    if (!result.history.empty())
      ctx.out << "final lm " << result.history.back().lm << ", total "
              << result.history.back().total << "\n";
  }
  return kSuccess;
}

// ---------------------------------------------------------------- generate

struct ModelBundle {
  Checkpoint checkpoint;
  Vocabulary vocab;
};

ModelBundle load_model(const std::string& checkpoint_path, const std::string& vocab_path) {
  open_input(checkpoint_path, "checkpoint");
  ModelBundle b{load_checkpoint(checkpoint_path), {}};
  const fs::path vp = vocab_path.empty() ? fs::path(checkpoint_path).parent_path() / "vocab.json"
                                         : fs::path(vocab_path);
  open_input(vp, "vocabulary");
  b.vocab = Vocabulary::load(vp);
  if (b.vocab.digest() != b.checkpoint.vocab_digest)
    throw ValidationError(0, "vocabulary '" + vp.string() + "' does not match the checkpoint");
  return b;
}

struct GenerateArgs {
  std::string checkpoint;
  std::string corpus;
  std::string out;
  std::string vocab;
  std::string mode = "greedy";
  std::size_t max_len = 32;
  double temperature = 1.0;
};

int cmd_generate(Context& ctx, const GenerateArgs& a) {
  const ModelBundle model = load_model(a.checkpoint, a.vocab);
  const auto corpus = read_corpus(a.corpus);
  DecodeOptions opts;
  if (a.mode == "greedy") opts.mode = DecodeMode::kGreedy;
  else if (a.mode == "sample") opts.mode = DecodeMode::kSample;
  else throw ConfigError("--mode must be greedy or sample");
  opts.max_len = a.max_len;
  opts.temperature = a.temperature;
  const std::uint64_t seed = ctx.common.seed.value_or(0);

  const ExampleOptions eo = example_options(model.checkpoint.train);
  std::vector<Prediction> predictions;
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    if (corpus[d].speaker_count() > model.vocab.speaker_slots())
      throw ConfigError("dialogue '" + corpus[d].id + "' has more speakers than the model's " +
                        std::to_string(model.vocab.speaker_slots()) + " slots");
    for (const Example& ex : make_examples(corpus[d], d, model.vocab, eo)) {
      opts.seed = derive_seed(seed, {d, ex.target});
      const auto ids = decode(model.checkpoint.model, model.checkpoint.params,
                              ex.context.token_ids, opts);
      predictions.push_back({corpus[d].id, ex.target, model.vocab.decode_words(ids)});
    }
  }
  auto out = open_output(a.out);
  write_predictions(out, predictions);
  ctx.summary["ok"] = true;
  ctx.summary["path"] = a.out;
  ctx.summary["predictions"] = predictions.size();
  ctx.summary["mode"] = a.mode;
  ctx.summary["seed"] = seed;
  if (!ctx.common.json)
    ctx.out << "wrote " << predictions.size() << " predictions to " << a.out << "\n";
  return kSuccess;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string predictions;
  std::string corpus;
  std::string strata = "none";
  std::string out;
};

int cmd_evaluate(Context& ctx, const EvaluateArgs& a) {
  const Strata strata = parse_strata(a.strata);
  std::vector<Prediction> predictions;
  {
    auto in = open_input(a.predictions, "predictions");
    predictions = parse_predictions(in);
  }
  const auto corpus = read_corpus(a.corpus);
  const auto rows = build_report(predictions, corpus, strata);
  if (!a.out.empty()) {
    auto out = open_output(a.out);
    write_report_csv(out, rows);
  }
  json table = json::array();
  for (const auto& r : rows) {
    json row = {{"stratum", r.stratum}, {"count", r.count}};
    if (r.metrics) {
      row["B-1"] = r.metrics->bleu1;
      row["B-2"] = r.metrics->bleu2;
      row["B-3"] = r.metrics->bleu3;
      row["R-L"] = r.metrics->rouge_l;
      row["D-1"] = r.metrics->distinct1;
      row["D-2"] = r.metrics->distinct2;
    } else {
      for (const char* k : {"B-1", "B-2", "B-3", "R-L", "D-1", "D-2"}) row[k] = nullptr;
    }
    table.push_back(row);
  }
  ctx.summary["ok"] = true;
  ctx.summary["strata"] = a.strata;
  ctx.summary["bleu_note"] = std::string(kBleuSmoothingNote);
  ctx.summary["rows"] = table;
  if (!ctx.common.json) ctx.out << format_report_table(rows);
  return kSuccess;
}

// -------------------------------------------------------------------- rank

struct RankArgs {
  std::string checkpoint;
  std::string corpus;
  std::string vocab;
  std::size_t triples = 500;
};

int cmd_rank(Context& ctx, const RankArgs& a) {
  const ModelBundle model = load_model(a.checkpoint, a.vocab);
  auto corpus = read_corpus(a.corpus);
  for (const auto& d : corpus)
    if (d.speaker_count() > model.vocab.speaker_slots())
      throw ConfigError("dialogue '" + d.id + "' has more speakers than the model's slots");
  const ExamplePool pool(std::move(corpus), model.vocab, example_options(model.checkpoint.train));
  const std::uint64_t seed = ctx.common.seed.value_or(0);
  const auto triples = sample_triples(pool, a.triples, seed);
  const auto [acc_ctx, acc_spk] = ranking_accuracy(model.checkpoint.model, model.checkpoint.params,
                                                   triples, model.checkpoint.train.objective);
  ctx.summary["ok"] = true;
  ctx.summary["triples"] = triples.size();
  ctx.summary["seed"] = seed;
  ctx.summary["rank_acc_ctx"] = acc_ctx;
  ctx.summary["rank_acc_spk"] = acc_spk;
  if (!ctx.common.json)
    ctx.out << "triples:              " << triples.size() << "\n"
            << "context ranking acc:  " << acc_ctx << "\n"
            << "speaker ranking acc:  " << acc_spk << "\n";
  return kSuccess;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const MissingInput*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const IntegrityError*>(&e) || dynamic_cast<const VersionError*>(&e) ||
      dynamic_cast<const ReferenceError*>(&e) || dynamic_cast<const EncodingError*>(&e))
    return kInputError;
  return kRuntimeError;
}

void add_common(CLI::App* sub, Common& common) {
  sub->add_flag("--json", common.json, "Print a machine-readable JSON summary");
  sub->add_option("--seed", common.seed, "Seed for every random choice of the command");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speaker-attributed dialogue language model toolkit", "salm"};
  app.require_subcommand(1);
  Common common;

  ValidateArgs validate_args;
  auto* validate = app.add_subcommand("validate", "Check a JSON Lines corpus");
  validate->add_option("corpus", validate_args.corpus, "Corpus path")->required();
  validate->add_flag("--lenient", validate_args.lenient,
                     "Report single-speaker dialogues as warnings");
  add_common(validate, common);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-party corpus");
  synth->add_option("--dialogues", synth_args.config.dialogues, "Number of dialogues")
      ->default_val(100);
  synth->add_option("--speakers", synth_args.config.speakers, "Speakers in the population")
      ->default_val(4);
  synth->add_option("--min-turns", synth_args.config.min_turns, "Fewest turns per dialogue")->default_val(4);
  synth->add_option("--max-turns", synth_args.config.max_turns, "Most turns per dialogue")->default_val(8);
  synth->add_option("--out,-o", synth_args.out, "Output path")->required();
  add_common(synth, common);

  TrainArgs train_args;
  auto* trainc = app.add_subcommand("train", "Train a model");
  trainc->add_option("--config,-c", train_args.config, "key = value training config");
  trainc->add_option("--corpus", train_args.corpus, "Training corpus")->required();
  trainc->add_option("--out,-o", train_args.out, "Output directory")->required();
  trainc->add_option("--set", train_args.overrides, "Config override key=value (repeatable)");
  trainc->add_option("--resume", train_args.resume, "Continue from this checkpoint");
  add_common(trainc, common);

  GenerateArgs generate_args;
  auto* generate = app.add_subcommand("generate", "Decode a response for every target turn");
  generate->add_option("--checkpoint", generate_args.checkpoint, "Trained checkpoint")->required();
  generate->add_option("--corpus", generate_args.corpus, "Corpus whose turns are decoded")->required();
  generate->add_option("--out,-o", generate_args.out, "Predictions JSON Lines")->required();
  generate->add_option("--vocab", generate_args.vocab,
                       "Vocabulary (default: vocab.json next to the checkpoint)");
  generate->add_option("--mode", generate_args.mode, "greedy or sample")
      ->check(CLI::IsMember({"greedy", "sample"}));
  generate->add_option("--max-len", generate_args.max_len, "Most tokens per response")->check(CLI::PositiveNumber);
  generate->add_option("--temperature", generate_args.temperature, "Sampling temperature")->check(CLI::PositiveNumber);
  add_common(generate, common);

  EvaluateArgs evaluate_args;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against the corpus");
  evaluate->add_option("--predictions", evaluate_args.predictions, "Predictions JSON Lines")->required();
  evaluate->add_option("--corpus", evaluate_args.corpus, "Reference corpus")->required();
  evaluate->add_option("--strata", evaluate_args.strata, "none, speaker or context");
  evaluate->add_option("--out,-o", evaluate_args.out, "Report CSV");
  add_common(evaluate, common);

  RankArgs rank_args;
  auto* rank = app.add_subcommand("rank", "Ranking accuracy on freshly sampled triples");
  rank->add_option("--checkpoint", rank_args.checkpoint, "Trained checkpoint")->required();
  rank->add_option("--corpus", rank_args.corpus, "Corpus to sample triples from")->required();
  rank->add_option("--vocab", rank_args.vocab, "Vocabulary (default: vocab.json next to the checkpoint)");
  rank->add_option("--triples", rank_args.triples, "Number of triples")->check(CLI::PositiveNumber);
  add_common(rank, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kSuccess;
    }
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  Context ctx{out, err, common};
  CLI::App* chosen = app.get_subcommands().front();
  ctx.summary["command"] = chosen->get_name();
  int code = kRuntimeError;
  try {
    if (chosen == validate) code = cmd_validate(ctx, validate_args);
    else if (chosen == synth) code = cmd_synth(ctx, synth_args);
    else if (chosen == trainc) code = cmd_train(ctx, train_args);
    else if (chosen == generate) code = cmd_generate(ctx, generate_args);
    else if (chosen == evaluate) code = cmd_evaluate(ctx, evaluate_args);
    else if (chosen == rank) code = cmd_rank(ctx, rank_args);
  } catch (const std::exception& e) {
    code = classify(e);
    err << "error: " << e.what() << "\n";
    ctx.summary["ok"] = false;
    ctx.summary["error"] = e.what();
  }
  ctx.summary["exit_code"] = code;
  if (common.json) out << ctx.summary.dump(2) << "\n";
  return code;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace salm::cli

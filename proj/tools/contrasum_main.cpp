// Pipeline driver: corpus generation, triplet building, training, evaluation,
// and model comparison. Exit codes: 0 ok, 2 config/validation/input errors,
// 3 non-finite training abort, 4 id misalignment in compare.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "contrasum/corpus.hpp"
#include "contrasum/corruption.hpp"
#include "contrasum/errors.hpp"
#include "contrasum/eval.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/kvconfig.hpp"
#include "contrasum/losses.hpp"
#include "contrasum/manifest.hpp"
#include "contrasum/model.hpp"
#include "contrasum/trainer.hpp"
#include "contrasum/vocab.hpp"

namespace fs = std::filesystem;
using namespace contrasum;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNonFinite = 3;
constexpr int kExitMisaligned = 4;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string manifest_path_for(const std::string& out) { return out + ".manifest.json"; }

corruption::Gazetteer resolve_gazetteer(const std::string& path,
                                        const std::vector<corpus::LabeledExample>& examples) {
  if (!path.empty()) return corruption::Gazetteer::load_tsv(path);
  if (!examples.empty() && !examples.front().primary_entity.empty()) {
    return corruption::Gazetteer::from_corpus(examples);
  }
  return corruption::Gazetteer::from_pairs(corpus::default_entity_pool());
}

corruption::DefectLexicon resolve_lexicon(const std::string& path,
                                          const std::vector<corpus::LabeledExample>& examples) {
  if (!path.empty()) return corruption::DefectLexicon::load_tsv(path);
  corruption::DefectLexicon lex =
      corruption::DefectLexicon::from_defect_pool(corpus::default_defect_pool());
  for (const corpus::LabeledExample& ex : examples) {
    if (!ex.defect_phrase.empty()) lex.add_marker(ex.defect_phrase);
  }
  return lex;
}

struct GenerateArgs {
  std::string config_path, out_path;
  std::optional<std::uint64_t> seed;
};

int cmd_generate_corpus(const GenerateArgs& args) {
  Timer timer;
  KvConfig kv = KvConfig::parse_file(args.config_path);
  corpus::CorpusSpec spec = corpus::CorpusSpec::from_config(kv);
  if (args.seed) spec.seed = *args.seed;
  const auto examples = corpus::generate_corpus(spec);
  corpus::save_corpus(examples, args.out_path);

  RunManifest manifest;
  manifest.command = "generate-corpus";
  manifest.config = kv.entries();
  manifest.config["seed"] = std::to_string(spec.seed);
  manifest.inputs = {args.config_path};
  manifest.seed = spec.seed;
  manifest.add_output(args.out_path);
  manifest.duration_seconds = timer.seconds();
  manifest.write(manifest_path_for(args.out_path));

  std::cout << "wrote " << examples.size() << " examples to " << args.out_path << "\n";
  return kExitOk;
}

struct BuildTripletsArgs {
  std::string corpus_path, out_path, gazetteer_path, antonyms_path;
  std::string policy = "RANDOM_EITHER";
  std::uint64_t seed = 0;
  std::size_t top_k = 50;
};

int cmd_build_triplets(const BuildTripletsArgs& args) {
  Timer timer;
  const auto examples = corpus::load_corpus(args.corpus_path);
  const auto gazetteer = resolve_gazetteer(args.gazetteer_path, examples);
  const auto lexicon = resolve_lexicon(args.antonyms_path, examples);
  const auto top = corruption::build_top_entities(examples, gazetteer, args.top_k);
  const corruption::Policy policy = corruption::policy_from_string(args.policy);

  const corruption::TripletBuild build =
      corruption::build_triplets(examples, gazetteer, lexicon, top, policy, args.seed);
  corruption::save_triplets(build.triplets, args.out_path);
  const std::string skips_path = args.out_path + ".skips.jsonl";
  corruption::save_skips(build.skips, skips_path);

  std::map<std::string, std::size_t> by_kind;
  for (const corruption::Triplet& t : build.triplets) ++by_kind[to_string(t.kind)];
  for (const auto& [kind, count] : by_kind) std::cout << kind << ": " << count << "\n";
  std::cout << "skipped: " << build.skips.size() << "\n";

  RunManifest manifest;
  manifest.command = "build-triplets";
  manifest.config = {{"policy", args.policy},
                     {"top_k", std::to_string(args.top_k)},
                     {"gazetteer", args.gazetteer_path.empty() ? "<derived>" : args.gazetteer_path},
                     {"antonyms", args.antonyms_path.empty() ? "<builtin>" : args.antonyms_path}};
  manifest.inputs = {args.corpus_path};
  manifest.seed = args.seed;
  manifest.add_output(args.out_path);
  manifest.add_output(skips_path);
  manifest.duration_seconds = timer.seconds();
  manifest.write(manifest_path_for(args.out_path));
  return kExitOk;
}

s2s::ModelConfig model_config_from_kv(const KvConfig& kv, const training::TrainConfig& tc) {
  s2s::ModelConfig mc;
  mc.d_model = static_cast<int>(kv.get_int_or("d_model", mc.d_model));
  mc.n_heads = static_cast<int>(kv.get_int_or("n_heads", mc.n_heads));
  mc.n_enc_layers = static_cast<int>(kv.get_int_or("n_enc_layers", mc.n_enc_layers));
  mc.n_dec_layers = static_cast<int>(kv.get_int_or("n_dec_layers", mc.n_dec_layers));
  mc.d_ff = static_cast<int>(kv.get_int_or("d_ff", mc.d_ff));
  mc.max_seq_len = static_cast<int>(kv.get_int_or("max_seq_len", mc.max_seq_len));
  mc.init_seed = kv.get_uint_or("init_seed", tc.seed);
  mc.precision = tc.precision;
  return mc;
}

struct TrainArgs {
  std::string triplets_path, config_path, out_dir, skips_path, corpus_path;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& args) {
  Timer timer;
  KvConfig kv = KvConfig::parse_file(args.config_path);
  training::TrainConfig config = training::TrainConfig::from_config(kv);
  if (args.seed) config.seed = *args.seed;

  const auto triplets = corruption::load_triplets(args.triplets_path);
  std::vector<training::TrainSample> samples = training::samples_from_triplets(triplets);
  if (!args.skips_path.empty()) {
    if (args.corpus_path.empty()) {
      throw ValidationError("corpus", "--skips requires --corpus to resolve skipped examples");
    }
    const auto examples = corpus::load_corpus(args.corpus_path);
    const auto skips = corruption::load_skips(args.skips_path);
    training::append_skipped(samples, examples, skips);
  }

  std::vector<std::string> texts;
  texts.reserve(samples.size() * 3);
  for (const training::TrainSample& s : samples) {
    texts.push_back(s.d);
    texts.push_back(s.s_plus);
    if (s.s_minus) texts.push_back(*s.s_minus);
  }
  const s2s::Vocabulary vocab = s2s::Vocabulary::build(texts);

  s2s::ModelConfig mc = model_config_from_kv(kv, config);
  mc.vocab_size = static_cast<int>(vocab.size());
  s2s::TransformerModel model(mc);

  fs::create_directories(args.out_dir);
  const std::string history_path = (fs::path(args.out_dir) / "history.csv").string();
  const std::string final_path = (fs::path(args.out_dir) / "model_final.ckpt").string();

  std::vector<std::string> periodic;
  training::CheckpointSink sink = [&](int step, const s2s::Seq2SeqModel& m) {
    const std::string path =
        (fs::path(args.out_dir) / ("model_step_" + std::to_string(step) + ".ckpt")).string();
    s2s::save_checkpoint(path, m, vocab);
    periodic.push_back(path);
  };

  const training::TrainHistory history = training::train(samples, model, config, vocab, sink);
  history.save_csv(history_path);
  s2s::save_checkpoint(final_path, model, vocab);

  RunManifest manifest;
  manifest.command = "train";
  manifest.config = kv.entries();
  manifest.config["seed"] = std::to_string(config.seed);
  manifest.inputs = {args.triplets_path, args.config_path};
  if (!args.skips_path.empty()) manifest.inputs.push_back(args.skips_path);
  if (!args.corpus_path.empty()) manifest.inputs.push_back(args.corpus_path);
  manifest.seed = config.seed;
  manifest.add_output(history_path);
  manifest.add_output(final_path);
  for (const std::string& p : periodic) manifest.add_output(p);
  manifest.duration_seconds = timer.seconds();
  manifest.write((fs::path(args.out_dir) / "manifest.json").string());

  const auto& last = history.steps.back();
  std::printf("trained %zu samples, %d steps, final total %.4f (l_pos %.4f)\n", samples.size(),
              last.step, last.total, last.l_pos);
  return kExitOk;
}

struct EvaluateArgs {
  std::string checkpoint_path, corpus_path, out_path, gazetteer_path, antonyms_path;
  std::size_t max_len = 24;
};

int cmd_evaluate(const EvaluateArgs& args) {
  Timer timer;
  const s2s::Checkpoint ckpt = s2s::load_checkpoint(args.checkpoint_path);
  const auto model = s2s::model_from_checkpoint(ckpt);
  const s2s::Vocabulary vocab = s2s::Vocabulary::from_tokens(ckpt.vocab_tokens);

  const auto [examples, labeled] = corpus::load_examples_flexible(args.corpus_path);
  if (!labeled) {
    std::cerr << "warning: input lacks gold annotations; consistency verdicts refused, "
                 "ROUGE only\n";
  }
  const auto gazetteer = resolve_gazetteer(args.gazetteer_path, labeled ? examples : std::vector<corpus::LabeledExample>{});
  const auto lexicon = resolve_lexicon(args.antonyms_path, labeled ? examples : std::vector<corpus::LabeledExample>{});

  const auto rows =
      eval::evaluate_examples(*model, vocab, examples, gazetteer, lexicon, args.max_len, labeled);
  eval::save_example_evals(rows, args.out_path);

  const eval::RougeMeans means = eval::mean_rouge(rows);
  std::map<std::string, std::size_t> verdict_counts;
  for (const eval::ExampleEval& row : rows) {
    if (row.verdict) ++verdict_counts[to_string(row.verdict->label)];
  }
  std::printf("evaluated %zu examples; mean F1: rouge1 %.4f rouge2 %.4f rougeL %.4f\n",
              rows.size(), means.rouge1.f1, means.rouge2.f1, means.rougeL.f1);
  for (const auto& [label, count] : verdict_counts) {
    std::printf("  %s: %zu\n", label.c_str(), count);
  }

  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.config = {{"checkpoint", args.checkpoint_path},
                     {"max_len", std::to_string(args.max_len)},
                     {"labeled", labeled ? "true" : "false"}};
  manifest.inputs = {args.checkpoint_path, args.corpus_path};
  manifest.add_output(args.out_path);
  manifest.duration_seconds = timer.seconds();
  manifest.write(manifest_path_for(args.out_path));
  return kExitOk;
}

struct CompareArgs {
  std::string baseline_path, treated_path, out_path;
};

int cmd_compare(const CompareArgs& args) {
  Timer timer;
  const auto baseline = eval::load_example_evals(args.baseline_path);
  const auto treated = eval::load_example_evals(args.treated_path);
  const eval::EvalReport report = eval::compare_models(baseline, treated);

  atomic_write_file(args.out_path, report.to_json() + "\n");
  const std::string table = report.to_text_table();
  atomic_write_file(args.out_path + ".txt", table);
  std::cout << table;

  RunManifest manifest;
  manifest.command = "compare";
  manifest.inputs = {args.baseline_path, args.treated_path};
  manifest.add_output(args.out_path);
  manifest.add_output(args.out_path + ".txt");
  manifest.duration_seconds = timer.seconds();
  manifest.write(manifest_path_for(args.out_path));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrasum: contrastive factual-consistency training for summarization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate-corpus", "generate a labeled synthetic corpus");
  gen_cmd->add_option("--config", gen.config_path, "corpus spec (key = value)")->required();
  gen_cmd->add_option("--out", gen.out_path, "output corpus JSONL")->required();
  gen_cmd->add_option("--seed", gen.seed, "override the config seed");

  BuildTripletsArgs bt;
  auto* bt_cmd = app.add_subcommand("build-triplets", "corrupt reference summaries into triplets");
  bt_cmd->add_option("--corpus", bt.corpus_path, "corpus JSONL")->required();
  bt_cmd->add_option("--out", bt.out_path, "output triplet JSONL")->required();
  bt_cmd->add_option("--policy", bt.policy, "ENTITY_ONLY | DEFECT_ONLY | RANDOM_EITHER");
  bt_cmd->add_option("--seed", bt.seed, "corruption seed");
  bt_cmd->add_option("--gazetteer", bt.gazetteer_path,
                     "entity TSV (surface<TAB>TYPE); default: derived from the corpus");
  bt_cmd->add_option("--antonyms", bt.antonyms_path,
                     "defect lexicon TSV (word<TAB>word pairs or single markers); "
                     "default: built-in pool plus corpus defect phrases");
  bt_cmd->add_option("--top-k", bt.top_k, "size of the entity fallback list");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "train a model on triplets");
  tr_cmd->add_option("--triplets", tr.triplets_path, "triplet JSONL")->required();
  tr_cmd->add_option("--config", tr.config_path, "training config (key = value)")->required();
  tr_cmd->add_option("--out", tr.out_dir, "output directory")->required();
  tr_cmd->add_option("--seed", tr.seed, "override the config seed");
  tr_cmd->add_option("--skips", tr.skips_path, "skip log; these examples train with ORDINARY loss");
  tr_cmd->add_option("--corpus", tr.corpus_path, "corpus JSONL (required with --skips)");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "generate summaries and score them");
  ev_cmd->add_option("--checkpoint", ev.checkpoint_path, "model checkpoint")->required();
  ev_cmd->add_option("--corpus", ev.corpus_path, "examples JSONL")->required();
  ev_cmd->add_option("--out", ev.out_path, "per-example output JSONL")->required();
  ev_cmd->add_option("--gazetteer", ev.gazetteer_path, "entity TSV override");
  ev_cmd->add_option("--antonyms", ev.antonyms_path, "defect lexicon TSV override");
  ev_cmd->add_option("--max-len", ev.max_len, "max generated tokens");

  CompareArgs cp;
  auto* cp_cmd = app.add_subcommand("compare", "compare two evaluation outputs");
  cp_cmd->add_option("--baseline", cp.baseline_path, "baseline evaluation JSONL")->required();
  cp_cmd->add_option("--treated", cp.treated_path, "treated evaluation JSONL")->required();
  cp_cmd->add_option("--out", cp.out_path, "report JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  const bool is_compare = cp_cmd->parsed();
  try {
    if (gen_cmd->parsed()) return cmd_generate_corpus(gen);
    if (bt_cmd->parsed()) return cmd_build_triplets(bt);
    if (tr_cmd->parsed()) return cmd_train(tr);
    if (ev_cmd->parsed()) return cmd_evaluate(ev);
    if (cp_cmd->parsed()) return cmd_compare(cp);
  } catch (const TrainAbort& e) {
    std::cerr << "error: training aborted: " << e.what() << "\n";
    return kExitNonFinite;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_compare ? kExitMisaligned : kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

// Python bindings for the main pipeline operations.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <variant>

#include "contrasum/corpus.hpp"
#include "contrasum/corruption.hpp"
#include "contrasum/errors.hpp"
#include "contrasum/eval.hpp"
#include "contrasum/losses.hpp"
#include "contrasum/manifest.hpp"
#include "contrasum/model.hpp"
#include "contrasum/trainer.hpp"
#include "contrasum/vocab.hpp"

namespace py = pybind11;
using namespace contrasum;

PYBIND11_MODULE(_contrasum, m) {
  m.doc() = "Contrastive factual-consistency training toolkit";
  m.attr("__version__") = kToolVersion;

  // ---- corpus ----
  py::enum_<corpus::EntityType>(m, "EntityType")
      .value("PRODUCT", corpus::EntityType::kProduct)
      .value("COMPONENT", corpus::EntityType::kComponent)
      .value("BRAND", corpus::EntityType::kBrand);

  py::enum_<corpus::DefectPolarity>(m, "DefectPolarity")
      .value("AFFIRMED", corpus::DefectPolarity::kAffirmed)
      .value("NEGATED", corpus::DefectPolarity::kNegated);

  py::class_<corpus::LabeledExample>(m, "LabeledExample")
      .def(py::init<>())
      .def_readwrite("id", &corpus::LabeledExample::id)
      .def_readwrite("source", &corpus::LabeledExample::source)
      .def_readwrite("reference", &corpus::LabeledExample::reference)
      .def_readwrite("primary_entity", &corpus::LabeledExample::primary_entity)
      .def_readwrite("entity_type", &corpus::LabeledExample::entity_type)
      .def_readwrite("distractors", &corpus::LabeledExample::distractors)
      .def_readwrite("defect_phrase", &corpus::LabeledExample::defect_phrase)
      .def_readwrite("defect_polarity", &corpus::LabeledExample::defect_polarity)
      .def("__repr__", [](const corpus::LabeledExample& ex) {
        return "<LabeledExample " + ex.id + ": '" + ex.reference + "'>";
      });

  py::class_<corpus::DefectEntry>(m, "DefectEntry")
      .def(py::init([](std::string phrase, std::optional<std::string> antonym) {
             return corpus::DefectEntry{std::move(phrase), std::move(antonym)};
           }),
           py::arg("phrase"), py::arg("antonym") = std::nullopt)
      .def_readwrite("phrase", &corpus::DefectEntry::phrase)
      .def_readwrite("antonym", &corpus::DefectEntry::antonym);

  py::class_<corpus::CorpusSpec>(m, "CorpusSpec")
      .def(py::init(&corpus::CorpusSpec::defaults))
      .def_readwrite("n_examples", &corpus::CorpusSpec::n_examples)
      .def_readwrite("entity_pool", &corpus::CorpusSpec::entity_pool)
      .def_readwrite("defect_pool", &corpus::CorpusSpec::defect_pool)
      .def_readwrite("negated_fraction", &corpus::CorpusSpec::negated_fraction)
      .def_readwrite("min_distractors", &corpus::CorpusSpec::min_distractors)
      .def_readwrite("max_distractors", &corpus::CorpusSpec::max_distractors)
      .def_readwrite("seed", &corpus::CorpusSpec::seed);

  m.def("generate_corpus", &corpus::generate_corpus, py::arg("spec"));
  m.def("save_corpus", &corpus::save_corpus, py::arg("examples"), py::arg("path"));
  m.def("load_corpus", &corpus::load_corpus, py::arg("path"));
  m.def("split_corpus", &corpus::split_corpus, py::arg("examples"), py::arg("train_fraction"),
        py::arg("seed"));

  // ---- corruption ----
  py::enum_<corruption::CorruptionKind>(m, "CorruptionKind")
      .value("ENTITY_SWAP", corruption::CorruptionKind::kEntitySwap)
      .value("NEGATION_ADD", corruption::CorruptionKind::kNegationAdd)
      .value("NEGATION_REMOVE", corruption::CorruptionKind::kNegationRemove)
      .value("ANTONYM_SWAP", corruption::CorruptionKind::kAntonymSwap);

  py::enum_<corruption::Policy>(m, "Policy")
      .value("ENTITY_ONLY", corruption::Policy::kEntityOnly)
      .value("DEFECT_ONLY", corruption::Policy::kDefectOnly)
      .value("RANDOM_EITHER", corruption::Policy::kRandomEither);

  py::class_<corruption::Gazetteer>(m, "Gazetteer")
      .def(py::init<>())
      .def("add", &corruption::Gazetteer::add, py::arg("surface"), py::arg("entity_type"))
      .def_static("from_corpus", &corruption::Gazetteer::from_corpus)
      .def_static("load_tsv", &corruption::Gazetteer::load_tsv)
      .def("save_tsv", &corruption::Gazetteer::save_tsv)
      .def("__len__", &corruption::Gazetteer::size);

  py::class_<corruption::DefectLexicon>(m, "DefectLexicon")
      .def(py::init<>())
      .def("add_marker", &corruption::DefectLexicon::add_marker)
      .def("add_antonym_pair", &corruption::DefectLexicon::add_antonym_pair)
      .def_static("from_defect_pool", &corruption::DefectLexicon::from_defect_pool)
      .def_static("load_tsv", &corruption::DefectLexicon::load_tsv)
      .def("save_tsv", &corruption::DefectLexicon::save_tsv)
      .def("antonym_of", [](const corruption::DefectLexicon& lex, const std::string& phrase) {
        return lex.antonym_of(phrase);
      });

  py::class_<corruption::EntitySpan>(m, "EntitySpan")
      .def_readonly("surface", &corruption::EntitySpan::surface)
      .def_readonly("entity_type", &corruption::EntitySpan::type)
      .def_readonly("begin", &corruption::EntitySpan::begin)
      .def_readonly("end", &corruption::EntitySpan::end);

  py::class_<corruption::Edit>(m, "Edit")
      .def_readonly("original", &corruption::Edit::original)
      .def_readonly("replacement", &corruption::Edit::replacement)
      .def_readonly("offset", &corruption::Edit::offset);

  py::class_<corruption::Triplet>(m, "Triplet")
      .def_readonly("id", &corruption::Triplet::id)
      .def_readonly("d", &corruption::Triplet::d)
      .def_readonly("s_plus", &corruption::Triplet::s_plus)
      .def_readonly("s_minus", &corruption::Triplet::s_minus)
      .def_readonly("corruption_kind", &corruption::Triplet::kind)
      .def_readonly("edit", &corruption::Triplet::edit)
      .def("__repr__", [](const corruption::Triplet& t) {
        return "<Triplet " + t.id + " " + to_string(t.kind) + ">";
      });

  py::class_<corruption::SkipRecord>(m, "SkipRecord")
      .def_readonly("id", &corruption::SkipRecord::id)
      .def_readonly("reason", &corruption::SkipRecord::reason);

  py::class_<corruption::TopEntities>(m, "TopEntities")
      .def("__len__",
           [](const corruption::TopEntities& t) { return t.ranked.size(); })
      .def("ranked", [](const corruption::TopEntities& t) {
        std::vector<std::tuple<std::string, corpus::EntityType, std::size_t>> out;
        for (const auto& item : t.ranked) out.emplace_back(item.surface, item.type, item.count);
        return out;
      });

  m.def("tag_entities", &corruption::tag_entities, py::arg("text"), py::arg("gazetteer"));
  m.def("build_top_entities", &corruption::build_top_entities, py::arg("examples"),
        py::arg("gazetteer"), py::arg("k") = 50);
  m.def(
      "build_triplets",
      [](const std::vector<corpus::LabeledExample>& examples, const corruption::Gazetteer& g,
         const corruption::DefectLexicon& lex, const corruption::TopEntities& top,
         corruption::Policy policy, std::uint64_t seed) {
        const auto build = corruption::build_triplets(examples, g, lex, top, policy, seed);
        return py::make_tuple(build.triplets, build.skips);
      },
      py::arg("examples"), py::arg("gazetteer"), py::arg("lexicon"), py::arg("top_entities"),
      py::arg("policy") = corruption::Policy::kRandomEither, py::arg("seed") = 0);
  m.def("save_triplets", &corruption::save_triplets);
  m.def("load_triplets", &corruption::load_triplets);

  // ---- seq2seq core ----
  py::enum_<s2s::Precision>(m, "Precision")
      .value("F32", s2s::Precision::kF32)
      .value("F64", s2s::Precision::kF64);

  py::class_<s2s::Vocabulary>(m, "Vocabulary")
      .def_static("build", &s2s::Vocabulary::build, py::arg("texts"))
      .def_static("from_tokens", &s2s::Vocabulary::from_tokens)
      .def("index_of", &s2s::Vocabulary::index_of)
      .def("token_at", &s2s::Vocabulary::token_at)
      .def("tokens", &s2s::Vocabulary::tokens)
      .def("__len__", &s2s::Vocabulary::size);

  m.def("word_tokenize", &s2s::word_tokenize, py::arg("text"));
  m.def("tokenize", &s2s::tokenize, py::arg("text"), py::arg("vocab"));
  m.def(
      "detokenize",
      [](const std::vector<int>& ids, const s2s::Vocabulary& vocab) {
        return s2s::detokenize(ids, vocab);
      },
      py::arg("ids"), py::arg("vocab"));

  py::class_<s2s::ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("d_model", &s2s::ModelConfig::d_model)
      .def_readwrite("n_heads", &s2s::ModelConfig::n_heads)
      .def_readwrite("n_enc_layers", &s2s::ModelConfig::n_enc_layers)
      .def_readwrite("n_dec_layers", &s2s::ModelConfig::n_dec_layers)
      .def_readwrite("d_ff", &s2s::ModelConfig::d_ff)
      .def_readwrite("max_seq_len", &s2s::ModelConfig::max_seq_len)
      .def_readwrite("vocab_size", &s2s::ModelConfig::vocab_size)
      .def_readwrite("init_seed", &s2s::ModelConfig::init_seed)
      .def_readwrite("precision", &s2s::ModelConfig::precision);

  py::class_<s2s::ScoredOutput>(m, "ScoredOutput")
      .def_readonly("target_length", &s2s::ScoredOutput::target_length)
      .def_readonly("vocab_size", &s2s::ScoredOutput::vocab_size)
      .def_readonly("logprobs", &s2s::ScoredOutput::logprobs)
      .def_readonly("target_tokens", &s2s::ScoredOutput::target_tokens)
      .def("logprob_at", &s2s::ScoredOutput::logprob_at);

  py::class_<s2s::TransformerModel>(m, "TransformerModel")
      .def(py::init<const s2s::ModelConfig&>(), py::arg("config"))
      .def_property_readonly("config", &s2s::TransformerModel::config)
      .def("param_count", &s2s::TransformerModel::param_count)
      .def("params", &s2s::TransformerModel::params_f64)
      .def("set_params",
           [](s2s::TransformerModel& model, const std::vector<double>& values) {
             model.set_params_f64(values);
           })
      .def(
          "forward",
          [](const s2s::TransformerModel& model, const std::vector<int>& src,
             const std::vector<int>& target) { return model.forward(src, target); },
          py::arg("src"), py::arg("target"))
      .def(
          "generate",
          [](const s2s::TransformerModel& model, const std::vector<int>& src,
             std::size_t max_len) { return model.generate(src, max_len); },
          py::arg("src"), py::arg("max_len"));

  m.def("save_checkpoint", &s2s::save_checkpoint, py::arg("path"), py::arg("model"),
        py::arg("vocab"));
  m.def("load_checkpoint_model", [](const std::string& path) {
    const s2s::Checkpoint ckpt = s2s::load_checkpoint(path);
    return py::make_tuple(s2s::model_from_checkpoint(ckpt),
                          s2s::Vocabulary::from_tokens(ckpt.vocab_tokens));
  });

  // ---- losses ----
  py::enum_<losses::Variant>(m, "Variant")
      .value("ORDINARY", losses::Variant::kOrdinary)
      .value("DC", losses::Variant::kDc)
      .value("CN", losses::Variant::kCn)
      .value("CC", losses::Variant::kCc);

  py::class_<losses::LossConfig>(m, "LossConfig")
      .def(py::init<>())
      .def_static("ordinary", &losses::LossConfig::ordinary)
      .def_static("dc_default", &losses::LossConfig::dc_default)
      .def_static("cn_default", &losses::LossConfig::cn_default)
      .def_static("cc_default", &losses::LossConfig::cc_default)
      .def_readwrite("variant", &losses::LossConfig::variant)
      .def_readwrite("alpha", &losses::LossConfig::alpha)
      .def_readwrite("margin", &losses::LossConfig::margin);

  py::class_<losses::LossValue>(m, "LossValue")
      .def_readonly("total", &losses::LossValue::total)
      .def_readonly("l_pos", &losses::LossValue::l_pos)
      .def_readonly("l_neg", &losses::LossValue::l_neg)
      .def_readonly("hinge_active", &losses::LossValue::hinge_active);

  m.def("loss_dc", &losses::loss_dc, py::arg("l_pos"), py::arg("l_neg"), py::arg("alpha"));
  m.def("loss_cn", &losses::loss_cn, py::arg("l_pos"), py::arg("l_neg"), py::arg("alpha"),
        py::arg("margin"));
  m.def("loss_cc", &losses::loss_cc, py::arg("l_pos"), py::arg("l_neg"), py::arg("alpha"),
        py::arg("margin"));
  m.def(
      "cross_entropy",
      [](const s2s::ScoredOutput& scored, const std::vector<int>& target) {
        return losses::cross_entropy(scored, target);
      },
      py::arg("scored"), py::arg("target"));
  m.def("contrastive_objective", &losses::contrastive_objective, py::arg("model"),
        py::arg("triplet"), py::arg("config"), py::arg("vocab"));

  // ---- trainer ----
  py::enum_<training::Optimizer>(m, "Optimizer")
      .value("SGD", training::Optimizer::kSgd)
      .value("ADAM", training::Optimizer::kAdam);

  py::class_<training::TrainSample>(m, "TrainSample")
      .def(py::init([](std::string id, std::string d, std::string s_plus,
                       std::optional<std::string> s_minus) {
             return training::TrainSample{std::move(id), std::move(d), std::move(s_plus),
                                       std::move(s_minus)};
           }),
           py::arg("id"), py::arg("d"), py::arg("s_plus"), py::arg("s_minus") = std::nullopt)
      .def_readwrite("id", &training::TrainSample::id)
      .def_readwrite("d", &training::TrainSample::d)
      .def_readwrite("s_plus", &training::TrainSample::s_plus)
      .def_readwrite("s_minus", &training::TrainSample::s_minus);

  m.def("samples_from_triplets", &training::samples_from_triplets);

  py::class_<training::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &training::TrainConfig::learning_rate)
      .def_readwrite("epochs", &training::TrainConfig::epochs)
      .def_readwrite("batch_size", &training::TrainConfig::batch_size)
      .def_readwrite("loss", &training::TrainConfig::loss)
      .def_readwrite("seed", &training::TrainConfig::seed)
      .def_readwrite("checkpoint_every", &training::TrainConfig::checkpoint_every)
      .def_readwrite("precision", &training::TrainConfig::precision)
      .def_readwrite("optimizer", &training::TrainConfig::optimizer);

  py::class_<training::StepRecord>(m, "StepRecord")
      .def_readonly("step", &training::StepRecord::step)
      .def_readonly("total", &training::StepRecord::total)
      .def_readonly("l_pos", &training::StepRecord::l_pos)
      .def_readonly("l_neg", &training::StepRecord::l_neg)
      .def_readonly("hinge_frac", &training::StepRecord::hinge_frac);

  py::class_<training::TrainHistory>(m, "TrainHistory")
      .def_readonly("steps", &training::TrainHistory::steps)
      .def("save_csv", &training::TrainHistory::save_csv);

  m.def(
      "train",
      [](const std::vector<training::TrainSample>& samples, s2s::TransformerModel& model,
         const training::TrainConfig& config, const s2s::Vocabulary& vocab) {
        return training::train(samples, model, config, vocab);
      },
      py::arg("samples"), py::arg("model"), py::arg("config"), py::arg("vocab"));
  m.def(
      "gradient_check",
      [](s2s::TransformerModel& model, const corruption::Triplet& triplet,
         const losses::LossConfig& cfg, const s2s::Vocabulary& vocab, double epsilon,
         int n_params_sampled, std::uint64_t seed) {
        return training::gradient_check(model, triplet, cfg, vocab, epsilon, n_params_sampled, seed);
      },
      py::arg("model"), py::arg("triplet"), py::arg("loss_config"), py::arg("vocab"),
      py::arg("epsilon") = 1e-4, py::arg("n_params_sampled") = 200, py::arg("seed") = 0);

  // ---- eval ----
  py::enum_<eval::Label>(m, "Label")
      .value("CONSISTENT", eval::Label::kConsistent)
      .value("WED", eval::Label::kWed)
      .value("IPD", eval::Label::kIpd)
      .value("OTHER", eval::Label::kOther);

  py::class_<eval::RougeScore>(m, "RougeScore")
      .def_readonly("precision", &eval::RougeScore::precision)
      .def_readonly("recall", &eval::RougeScore::recall)
      .def_readonly("f1", &eval::RougeScore::f1);

  py::class_<eval::ConsistencyVerdict>(m, "ConsistencyVerdict")
      .def_readonly("label", &eval::ConsistencyVerdict::label)
      .def_readonly("evidence", &eval::ConsistencyVerdict::evidence);

  py::class_<eval::ExampleEval>(m, "ExampleEval")
      .def_readonly("id", &eval::ExampleEval::id)
      .def_readonly("generated", &eval::ExampleEval::generated)
      .def_readonly("reference", &eval::ExampleEval::reference)
      .def_readonly("verdict", &eval::ExampleEval::verdict)
      .def_readonly("rouge1", &eval::ExampleEval::rouge1)
      .def_readonly("rouge2", &eval::ExampleEval::rouge2)
      .def_readonly("rougeL", &eval::ExampleEval::rougeL);

  py::class_<eval::EvalReport>(m, "EvalReport")
      .def_readonly("n_examples", &eval::EvalReport::n_examples)
      .def_readonly("has_verdicts", &eval::EvalReport::has_verdicts)
      .def_readonly("pct_corrected_by_type", &eval::EvalReport::pct_corrected_by_type)
      .def_readonly("pct_consistent_to_inconsistent",
                    &eval::EvalReport::pct_consistent_to_inconsistent)
      .def_readonly("overall_inconsistency_reduction",
                    &eval::EvalReport::overall_inconsistency_reduction)
      .def("to_json", &eval::EvalReport::to_json)
      .def("to_text_table", &eval::EvalReport::to_text_table);

  m.def("rouge_n", &eval::rouge_n, py::arg("candidate"), py::arg("reference"), py::arg("n"));
  m.def("rouge_l", &eval::rouge_l, py::arg("candidate"), py::arg("reference"));
  m.def("classify_consistency", &eval::classify_consistency, py::arg("generated"),
        py::arg("example"), py::arg("gazetteer"), py::arg("lexicon"));
  m.def(
      "evaluate_examples",
      [](const s2s::TransformerModel& model, const s2s::Vocabulary& vocab,
         const std::vector<corpus::LabeledExample>& examples, const corruption::Gazetteer& g,
         const corruption::DefectLexicon& lex, std::size_t max_len, bool labeled) {
        return eval::evaluate_examples(model, vocab, examples, g, lex, max_len, labeled);
      },
      py::arg("model"), py::arg("vocab"), py::arg("examples"), py::arg("gazetteer"),
      py::arg("lexicon"), py::arg("max_len") = 24, py::arg("labeled") = true);
  m.def("compare_models", &eval::compare_models, py::arg("baseline"), py::arg("treated"));

  // exceptions
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<TrainAbort>(m, "TrainAbortError", PyExc_RuntimeError);
}

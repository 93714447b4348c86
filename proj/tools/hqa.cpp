// hqa: batch command-line driver for the hybrid QA pipeline.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hybridqa/pipeline.hpp"

namespace fs = std::filesystem;
namespace pl = hybridqa::pipeline;

namespace {

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid open-domain QA pipeline over text passages and tables"};
  app.set_config("--config", "", "key=value config file (flags override it)");
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  // ingest
  std::string passages_in, tables_in, data_dir = "data";
  std::size_t max_words = 100, overlap = 0;
  auto* ingest = app.add_subcommand("ingest", "Validate and split passages, flatten tables");
  ingest->add_option("--passages", passages_in, "Passages JSONL")->required();
  ingest->add_option("--tables", tables_in, "Tables JSONL")->required();
  ingest->add_option("--data-dir", data_dir, "Output data directory");
  ingest->add_option("--max-words", max_words, "Words per passage")->check(CLI::PositiveNumber);
  ingest->add_option("--overlap", overlap, "Passage overlap in words");

  // index
  double k1 = 1.2, b = 0.75;
  auto* index = app.add_subcommand("index", "Build the textual and tabular BM25 indices");
  index->add_option("--data-dir", data_dir, "Data directory");
  index->add_option("--k1", k1, "BM25 k1");
  index->add_option("--b", b, "BM25 b");

  // retrieve
  std::string questions, run_out, run_in;
  std::size_t k_retrieve = 100;
  auto* retrieve = app.add_subcommand("retrieve", "Top-k BM25 candidates per kind");
  retrieve->add_option("--data-dir", data_dir, "Data directory");
  retrieve->add_option("--questions", questions, "Questions JSONL")->required();
  retrieve->add_option("--k", k_retrieve, "Candidates per kind")->check(CLI::PositiveNumber);
  retrieve->add_option("--out", run_out, "Run file")->required();

  // rerank
  std::string scorer_spec = "lexical", gold, training_out, reranked_out;
  std::size_t n_rerank = 50;
  std::uint64_t seed = 0;
  auto* rerank = app.add_subcommand("rerank", "Jointly rerank textual and tabular candidates");
  rerank->add_option("--data-dir", data_dir, "Data directory");
  rerank->add_option("--questions", questions, "Questions JSONL")->required();
  rerank->add_option("--run", run_in, "Run file from retrieve")->required();
  rerank->add_option("--scorer", scorer_spec, "'lexical' or http://host:port");
  rerank->add_option("--n", n_rerank, "Joint pool size")->check(CLI::PositiveNumber);
  rerank->add_option("--out", reranked_out, "Reranked run file")->required();
  rerank->add_option("--gold", gold, "Gold JSONL (for --training-out)");
  rerank->add_option("--training-out", training_out, "Write sampled training batches here");
  rerank->add_option("--seed", seed, "Sampling seed");

  // answer
  std::string generator_spec, predictions_out, targets_out;
  std::size_t beam = 3, max_context_tokens = 150;
  auto* answer = app.add_subcommand("answer", "Rerank, generate and resolve answers");
  answer->add_option("--data-dir", data_dir, "Data directory");
  answer->add_option("--questions", questions, "Questions JSONL")->required();
  answer->add_option("--run", run_in, "Run file from retrieve")->required();
  answer->add_option("--scorer", scorer_spec, "'lexical' or http://host:port");
  answer->add_option("--n", n_rerank, "Joint pool size")->check(CLI::PositiveNumber);
  answer->add_option("--generator", generator_spec,
                     "stub:<fixtures.jsonl> | constant:<text> | first-candidate | http://host:port")
      ->required();
  answer->add_option("--beam", beam, "Outputs per question")->check(CLI::PositiveNumber);
  answer->add_option("--max-context-tokens", max_context_tokens, "Tokens kept per candidate")
      ->check(CLI::PositiveNumber);
  answer->add_option("--out", predictions_out, "Predictions JSONL")->required();
  answer->add_option("--gold", gold, "Gold JSONL (for --targets-out)");
  answer->add_option("--targets-out", targets_out, "Write prefixed generator targets here");
  answer->add_option("--seed", seed, "Target sampling seed");

  // evaluate
  std::string predictions_in, qrels, report_out, text_out, reranked_in;
  std::vector<std::size_t> cutoffs = hybridqa::eval::kDefaultCutoffs;
  std::size_t depth = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold");
  evaluate->add_option("--data-dir", data_dir, "Data directory");
  evaluate->add_option("--predictions", predictions_in, "Predictions JSONL")->required();
  evaluate->add_option("--gold", gold, "Gold JSONL")->required();
  evaluate->add_option("--run", run_in, "Retrieve run (textual/tabular recall)");
  evaluate->add_option("--reranked", reranked_in, "Reranked run (hybrid recall)");
  evaluate->add_option("--qrels", qrels, "Qrels file; derived from gold answers if absent");
  evaluate->add_option("--cutoffs", cutoffs, "Recall cutoffs");
  evaluate->add_option("--depth", depth, "MAP/MRR depth, 0 = full run");
  evaluate->add_option("--out", report_out, "Report JSON")->required();
  evaluate->add_option("--text", text_out, "Also write the plain-text tables here");

  // make-wikisql-both
  std::string subset_out;
  auto* both = app.add_subcommand("make-wikisql-both", "Select questions answerable from both evidence kinds");
  both->add_option("--data-dir", data_dir, "Data directory");
  both->add_option("--questions", questions, "Questions JSONL")->required();
  both->add_option("--gold", gold, "Gold JSONL")->required();
  both->add_option("--run", run_in, "Run file from retrieve")->required();
  both->add_option("--out", subset_out, "Selected questions JSONL")->required();

  // report
  std::string report_in;
  auto* report = app.add_subcommand("report", "Render a report JSON as plain-text tables");
  report->add_option("--report", report_in, "Report JSON")->required();
  report->add_option("--out", text_out, "Output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto s = pl::ingest(passages_in, tables_in, data_dir, {max_words, overlap});
      std::fprintf(stderr, "ingested %zu passages, %zu tables (%zu tabular passages)\n", s.passages, s.tables,
                   s.table_passages);
    } else if (*index) {
      pl::build_indices(data_dir, {k1, b});
    } else if (*retrieve) {
      pl::retrieve_stage(data_dir, questions, k_retrieve, run_out);
    } else if (*rerank) {
      if (!training_out.empty() && gold.empty()) throw hybridqa::DataError("--training-out requires --gold");
      auto scorer = pl::make_scorer(scorer_spec);
      pl::RerankOptions opts;
      opts.n = n_rerank;
      opts.seed = seed;
      pl::rerank_stage(data_dir, questions, run_in, *scorer, opts, reranked_out, opt_path(gold), opt_path(training_out));
    } else if (*answer) {
      if (!targets_out.empty() && gold.empty()) throw hybridqa::DataError("--targets-out requires --gold");
      auto scorer = pl::make_scorer(scorer_spec);
      auto generator = pl::make_generator(generator_spec);
      pl::AnswerOptions opts;
      opts.rerank.n = n_rerank;
      opts.rerank.seed = seed;
      opts.beam_size = beam;
      opts.max_context_tokens = max_context_tokens;
      pl::answer_stage(data_dir, questions, run_in, *scorer, *generator, opts, predictions_out, opt_path(gold),
                       opt_path(targets_out));
    } else if (*evaluate) {
      pl::EvaluateInputs in;
      in.data_dir = data_dir;
      in.predictions = predictions_in;
      in.gold = gold;
      in.run = opt_path(run_in);
      in.reranked = opt_path(reranked_in);
      in.qrels = opt_path(qrels);
      in.cutoffs = cutoffs;
      in.depth = depth;
      std::vector<std::string> warnings;
      const auto j = pl::evaluate_stage(in, &warnings);
      for (const auto& w : warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      hybridqa::util::write_file_atomic(report_out, j.dump(2) + "\n");
      if (!text_out.empty()) hybridqa::util::write_file_atomic(text_out, hybridqa::eval::render_report_text(j));
    } else if (*both) {
      const auto kept = pl::wikisql_both_stage(data_dir, questions, gold, run_in, subset_out);
      std::fprintf(stderr, "kept %zu questions\n", kept.size());
    } else if (*report) {
      pl::require_file(report_in);
      const auto text = hybridqa::eval::render_report_text(nlohmann::json::parse(hybridqa::util::read_file(report_in)));
      if (text_out.empty()) {
        std::cout << text;
      } else {
        hybridqa::util::write_file_atomic(text_out, text);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "hqa: error: %s\n", e.what());
    return 1;
  }
  return 0;
}

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmd/trainer.hpp"

namespace pmd {

struct ReportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest exact decimal form; parsing it back recovers the identical bits.
std::string format_double(double v);

// step,model,language,dev_ce,accuracy,alpha,mu; one row per snapshot, model
// and language, in that nesting order.
std::string run_csv(const RunRecord& rec);

// round,model,step,mu,actions,alpha; the vector columns join entries with
// '|'. Empty when the run's strategy never searched.
std::string weight_log_csv(const RunRecord& rec);

struct RunCsvRow {
  std::int64_t step = 0;
  int model = 0;
  int language = 0;
  double dev_ce = 0.0;
  double accuracy = 0.0;
  double alpha = 0.0;
  double mu = 0.0;
};

std::vector<RunCsvRow> parse_run_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Final-step rows of one parsed run, averaged into per-model aggregates.
struct RunAggregate {
  int model = 0;
  double overall_ce = 0.0;
  double hrl_ce = 0.0;
  double lrl_ce = 0.0;
  double accuracy = 0.0;
};

std::vector<RunAggregate> aggregate_final(const std::vector<RunCsvRow>& rows);

// run,seed,model,hrl_ce,lrl_ce for every aggregate, the raw material for
// dominance plots.
std::string pareto_points_csv(
    const std::vector<std::tuple<std::string, std::uint64_t,
                                 std::vector<RunAggregate>>>& entries);

// Fixed-width table of per-run means across seeds, recomputable from the
// run CSVs alone.
std::string summary_table(
    const std::vector<std::pair<std::string, std::vector<RunAggregate>>>&
        per_run_means);

}  // namespace pmd

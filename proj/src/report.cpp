#include "pmd/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace pmd {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Trim to the shortest form that still round-trips exactly.
  for (int prec = 1; prec < 17; ++prec) {
    char probe[40];
    std::snprintf(probe, sizeof probe, "%.*g", prec, v);
    if (std::strtod(probe, nullptr) == v) return probe;
  }
  return buf;
}

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += '|';
    s += format_double(v[i]);
  }
  return s;
}

std::string join_actions(const std::vector<Action>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += '|';
    s += action_name(v[i]);
  }
  return s;
}

}  // namespace

std::string run_csv(const RunRecord& rec) {
  std::string out = "step,model,language,dev_ce,accuracy,alpha,mu\n";
  for (const Snapshot& snap : rec.snapshots)
    for (const ModelSnap& m : snap.models)
      for (std::size_t l = 0; l < m.eval.size(); ++l) {
        out += std::to_string(snap.step);
        out += ',';
        out += std::to_string(m.label);
        out += ',';
        out += std::to_string(l);
        out += ',';
        out += format_double(m.eval[l].ce);
        out += ',';
        out += format_double(m.eval[l].accuracy);
        out += ',';
        out += format_double(m.alpha[l]);
        out += ',';
        out += format_double(snap.mu);
        out += '\n';
      }
  return out;
}

std::string weight_log_csv(const RunRecord& rec) {
  if (rec.weight_log.empty()) return "";
  std::string out = "round,model,step,mu,actions,alpha\n";
  for (const WeightLogRow& row : rec.weight_log) {
    out += std::to_string(row.round);
    out += ',';
    out += std::to_string(row.label);
    out += ',';
    out += std::to_string(row.step);
    out += ',';
    out += format_double(row.mu);
    out += ',';
    out += join_actions(row.actions);
    out += ',';
    out += join_doubles(row.alpha);
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = line.find(sep, start);
    out.push_back(line.substr(start, p == std::string::npos ? p : p - start));
    if (p == std::string::npos) break;
    start = p + 1;
  }
  return out;
}

double parse_double(const std::string& s, std::size_t lineno) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ReportError("csv: bad number '" + s + "' at line " +
                      std::to_string(lineno));
  return v;
}

}  // namespace

std::vector<RunCsvRow> parse_run_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<RunCsvRow> rows;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1) {
      if (line != "step,model,language,dev_ce,accuracy,alpha,mu")
        throw ReportError("csv: unexpected header '" + line + "'");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7)
      throw ReportError("csv: expected 7 fields at line " +
                        std::to_string(lineno));
    RunCsvRow r;
    r.step = static_cast<std::int64_t>(parse_double(f[0], lineno));
    r.model = static_cast<int>(parse_double(f[1], lineno));
    r.language = static_cast<int>(parse_double(f[2], lineno));
    r.dev_ce = parse_double(f[3], lineno);
    r.accuracy = parse_double(f[4], lineno);
    r.alpha = parse_double(f[5], lineno);
    r.mu = parse_double(f[6], lineno);
    rows.push_back(r);
  }
  if (lineno == 0) throw ReportError("csv: empty input");
  return rows;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ReportError("cannot open for writing: " + path);
  os << content;
  if (!os) throw ReportError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ReportError("cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<RunAggregate> aggregate_final(const std::vector<RunCsvRow>& rows) {
  if (rows.empty()) throw ReportError("csv: no rows to aggregate");
  std::int64_t last = rows.front().step;
  int max_lang = 0;
  for (const RunCsvRow& r : rows) {
    last = std::max(last, r.step);
    max_lang = std::max(max_lang, r.language);
  }
  const std::size_t langs = static_cast<std::size_t>(max_lang) + 1;
  const std::size_t lrl_lo = lrl_start(langs);

  std::map<int, std::vector<const RunCsvRow*>> by_model;
  for (const RunCsvRow& r : rows)
    if (r.step == last) by_model[r.model].push_back(&r);

  std::vector<RunAggregate> out;
  for (const auto& [model, mrows] : by_model) {
    if (mrows.size() != langs)
      throw ReportError("csv: final step is missing language rows");
    RunAggregate a;
    a.model = model;
    double hrl = 0.0, lrl = 0.0;
    for (const RunCsvRow* r : mrows) {
      a.overall_ce += r->dev_ce;
      a.accuracy += r->accuracy;
      (static_cast<std::size_t>(r->language) < lrl_lo ? hrl : lrl) +=
          r->dev_ce;
    }
    a.overall_ce /= static_cast<double>(langs);
    a.accuracy /= static_cast<double>(langs);
    a.hrl_ce = hrl / static_cast<double>(lrl_lo);
    a.lrl_ce = lrl / static_cast<double>(langs - lrl_lo);
    out.push_back(a);
  }
  return out;
}

std::string pareto_points_csv(
    const std::vector<std::tuple<std::string, std::uint64_t,
                                 std::vector<RunAggregate>>>& entries) {
  std::string out = "run,seed,model,hrl_ce,lrl_ce\n";
  for (const auto& [run, seed, aggs] : entries)
    for (const RunAggregate& a : aggs) {
      out += run;
      out += ',';
      out += std::to_string(seed);
      out += ',';
      out += std::to_string(a.model);
      out += ',';
      out += format_double(a.hrl_ce);
      out += ',';
      out += format_double(a.lrl_ce);
      out += '\n';
    }
  return out;
}

std::string summary_table(
    const std::vector<std::pair<std::string, std::vector<RunAggregate>>>&
        per_run_means) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-18s %-5s %-11s %-11s %-11s %-9s\n", "run",
                "model", "overall_ce", "hrl_ce", "lrl_ce", "accuracy");
  out += buf;
  for (const auto& [run, aggs] : per_run_means)
    for (const RunAggregate& a : aggs) {
      std::snprintf(buf, sizeof buf, "%-18s %-5d %-11.6f %-11.6f %-11.6f %-9.6f\n",
                    run.c_str(), a.model, a.overall_ce, a.hrl_ce, a.lrl_ce,
                    a.accuracy);
      out += buf;
    }
  return out;
}

}  // namespace pmd

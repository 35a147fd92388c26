#include "declmi/report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace declmi::report {

namespace {

using experiment::ExperimentResult;
using experiment::QuantityResult;

std::ofstream open_out(const std::string& out_dir, const std::string& name,
                       std::vector<std::string>& written) {
  std::filesystem::create_directories(out_dir);
  const std::string path = (std::filesystem::path(out_dir) / name).string();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  written.push_back(path);
  return os;
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string pct(double fraction) { return fmt(fraction * 100.0, 1) + "%"; }

std::string significance_mark(const QuantityResult* q) {
  if (q == nullptr || !q->ok || !q->report.significance) return "";
  return q->report.significance->reject ? " *" : "";
}

double component(const QuantityResult& q, const std::string& key) {
  const auto it = q.report.components.find(key);
  return it == q.report.components.end() ? std::nan("") : it->second;
}

void markdown_block(std::ostream& os, const std::string& title, const ExperimentResult& r,
                    const std::string& quantity, const std::string& h_label,
                    const std::string& hq_label, const std::string& mi_label,
                    const std::string& h_key, const std::string& hq_key) {
  os << "## " << title << "\n\n";
  const QuantityResult* q = r.find(quantity);
  if (q == nullptr) {
    os << "_not requested_\n\n";
    return;
  }
  if (!q->ok) {
    os << "_failed: " << q->error << "_\n\n";
    return;
  }
  os << "| " << h_label << " | " << hq_label << " | " << mi_label << " | U |\n";
  os << "|---|---|---|---|\n";
  os << "| " << fmt(component(*q, h_key), 2) << " | " << fmt(component(*q, hq_key), 2) << " | "
     << fmt(q->report.value_bits, 2) << significance_mark(q) << " | "
     << (q->report.uncertainty ? pct(*q->report.uncertainty) : "-") << " |\n";
  if (q->report.significance) {
    os << "\n(t = " << fmt(q->report.significance->t, 2)
       << ", adjusted p = " << fmt(q->report.significance->p_adjusted, 4) << ")\n";
  }
  os << "\n";
}

}  // namespace

std::vector<std::string> emit_report(const ExperimentResult& result, const std::string& format,
                                     const std::string& out_dir) {
  std::vector<std::string> written;

  if (format == "json") {
    auto os = open_out(out_dir, "result.json", written);
    os << result.to_json().dump(1) << "\n";
    if (!os) throw std::runtime_error("write failed: result.json");
    return written;
  }

  if (format == "csv") {
    {
      auto os = open_out(out_dir, "per_class.csv", written);
      os << "class,n,mi_meaning_bits,mi_form_bits,mi_both_bits,mi_tripartite_bits\n";
      auto cell = [&](const std::string& quantity, std::size_t c) -> std::string {
        const QuantityResult* q = result.find(quantity);
        if (q == nullptr || !q->ok || c >= q->report.per_class_bits.size() ||
            !q->report.per_class_bits[c])
          return "";
        return fmt(*q->report.per_class_bits[c], 6);
      };
      for (std::size_t c = 0; c < result.class_names.size(); ++c) {
        os << result.class_names[c] << "," << result.class_sizes[c] << "," << cell("meaning", c)
           << "," << cell("form", c) << "," << cell("both", c) << "," << cell("tripartite", c)
           << "\n";
      }
    }
    {
      auto os = open_out(out_dir, "headline.csv", written);
      os << "quantity,value_bits,uncertainty,t,df,p_raw,p_adjusted,significant,error\n";
      for (const auto& q : result.quantities) {
        os << q.name << ",";
        if (q.ok) {
          os << fmt(q.report.value_bits, 6) << ","
             << (q.report.uncertainty ? fmt(*q.report.uncertainty, 6) : "") << ",";
          if (q.report.significance) {
            const auto& s = *q.report.significance;
            os << fmt(s.t, 6) << "," << fmt(s.df, 3) << "," << fmt(s.p_raw, 8) << ","
               << fmt(s.p_adjusted, 8) << "," << (s.reject ? "yes" : "no") << ",";
          } else {
            os << ",,,,,";
          }
          os << "\n";
        } else {
          os << ",,,,,,," << q.error << "\n";
        }
      }
    }
    return written;
  }

  if (format == "markdown") {
    auto os = open_out(out_dir, "report.md", written);
    const std::string lang = result.config_echo.value("language", "default");
    os << "# Declension-class information report: " << lang << "\n\n";
    os << result.class_names.size() << " classes, " << result.gender_names.size()
       << " genders.\n\n";

    markdown_block(os, "Form & Declension Class (LSTM)", result, "form", "H(C|G)", "Hq(C|W,G)",
                   "MI(C;W|G)", "h", "hq");
    markdown_block(os, "Meaning & Declension Class (MLP)", result, "meaning", "H(C|G)",
                   "Hq(C|V,G)", "MI(C;V|G)", "h", "hq");
    markdown_block(os, "Both (Form and Meaning) & Declension Class", result, "both", "H(C|G)",
                   "Hq(C|W,V,G)", "MI(C;W,V|G)", "h", "hq");
    markdown_block(os, "Tripartite MI (LSTM)", result, "tripartite", "MI(C;W|G)", "MI(C;W|V,G)",
                   "MI(C;W;V|G)", "mi_cw_g", "mi_cw_vg");
    markdown_block(os, "Class & Gender", result, "gender", "H(C)", "H(C|G)", "MI(C;G)", "h",
                   "hq");

    os << "## Surprisal extremes\n\n";
    std::string source;
    for (const std::string candidate : {"both", "form", "meaning"})
      if (result.surprisal_highest.count(candidate)) {
        source = candidate;
        break;
      }
    if (source.empty()) {
      os << "_no model-based quantity succeeded_\n";
    } else {
      os << "Model: " << source << "\n\n";
      os << "| form | class | gender | surprisal (bits) |\n|---|---|---|---|\n";
      for (const auto& row : result.surprisal_highest.at(source))
        os << "| " << row.form << " | " << row.class_name << " | " << row.gender_name << " | "
           << fmt(row.bits, 3) << " |\n";
      for (const auto& row : result.surprisal_lowest.at(source))
        os << "| " << row.form << " | " << row.class_name << " | " << row.gender_name << " | "
           << fmt(row.bits, 3) << " |\n";
    }
    os << "\n";
    return written;
  }

  throw std::invalid_argument("emit_report: unknown format '" + format + "'");
}

}  // namespace declmi::report

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mapscope/classify.hpp"
#include "text_util.hpp"

namespace mapscope {

namespace {

nlohmann::ordered_json scores_json(double p, double r, double f1) {
  nlohmann::ordered_json j;
  j["precision"] = p;
  j["recall"] = r;
  j["f1"] = f1;
  return j;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

nlohmann::ordered_json report_to_json(const ClassificationReport& report) {
  nlohmann::ordered_json doc;
  auto classes = nlohmann::ordered_json::array();
  for (const auto& c : report.classes) {
    auto row = scores_json(c.precision, c.recall, c.f1);
    row["support"] = c.support;
    nlohmann::ordered_json labeled;
    labeled["label"] = c.label;
    labeled.update(row);
    classes.push_back(std::move(labeled));
  }
  doc["classes"] = std::move(classes);
  doc["accuracy"] = report.accuracy;
  doc["macro_avg"] = scores_json(report.macro_avg.precision, report.macro_avg.recall, report.macro_avg.f1);
  doc["weighted_avg"] =
      scores_json(report.weighted_avg.precision, report.weighted_avg.recall, report.weighted_avg.f1);
  doc["total_support"] = report.total_support;
  doc["total"] = report.total;
  return doc;
}

std::string report_to_text(const ClassificationReport& report) {
  std::size_t width = std::string_view("Weighted Average").size();
  for (const auto& c : report.classes) width = std::max(width, c.label.size());

  std::ostringstream out;
  auto cell = [&out](const std::string& s) {
    out << std::string(s.size() < 10 ? 10 - s.size() : 1, ' ') << s;
  };
  auto label = [&out, width](const std::string& s) { out << s << std::string(width - s.size(), ' '); };

  label("Category");
  cell("Precision");
  cell("Recall");
  cell("f1-Score");
  cell("Support");
  out << "\n";
  for (const auto& c : report.classes) {
    label(c.label);
    cell(fixed2(c.precision));
    cell(fixed2(c.recall));
    cell(fixed2(c.f1));
    cell(std::to_string(c.support));
    out << "\n";
  }
  label("Accuracy");
  cell("");
  cell("");
  cell(fixed2(report.accuracy));
  cell(std::to_string(report.total));
  out << "\n";
  label("Macro Average");
  cell(fixed2(report.macro_avg.precision));
  cell(fixed2(report.macro_avg.recall));
  cell(fixed2(report.macro_avg.f1));
  cell(std::to_string(report.total_support));
  out << "\n";
  label("Weighted Average");
  cell(fixed2(report.weighted_avg.precision));
  cell(fixed2(report.weighted_avg.recall));
  cell(fixed2(report.weighted_avg.f1));
  cell(std::to_string(report.total_support));
  out << "\n";
  return out.str();
}

std::string confusion_to_csv(const ConfusionMatrix& matrix) {
  std::ostringstream out;
  out << "truth\\predicted";
  for (const auto& l : matrix.labels) out << ',' << detail::csv_escape(l);
  out << '\n';
  for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
    out << detail::csv_escape(matrix.labels[i]);
    for (auto c : matrix.counts[i]) out << ',' << c;
    out << '\n';
  }
  return out.str();
}

nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& matrix) {
  nlohmann::ordered_json doc;
  doc["labels"] = matrix.labels;
  doc["counts"] = matrix.counts;
  return doc;
}

std::string predictions_to_jsonl(std::span<const Prediction> predictions) {
  std::string out;
  for (const auto& p : predictions) {
    nlohmann::ordered_json row;
    row["id"] = p.id;
    row["truth"] = p.truth;
    row["predicted"] = p.predicted;
    out += row.dump();
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json composition_to_json(const CompositionSummary& summary) {
  nlohmann::ordered_json doc;
  doc["total"] = summary.total;
  doc["group_fraction"] = summary.group_fraction;
  doc["label_fraction"] = summary.label_fraction;
  doc["focus_group"] = summary.focus_group;
  doc["focus_total"] = summary.focus_total;
  doc["focus_label_fraction"] = summary.focus_label_fraction;
  return doc;
}

}  // namespace mapscope

#include "mapscope/classify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "mapscope/error.hpp"
#include "text_util.hpp"

namespace mapscope {

namespace {

// Distance with a precomputed norm for the stored side.
double distance_with_norm(std::span<const double> query, double query_norm,
                          std::span<const double> stored, double stored_norm, Metric metric) {
  if (metric == Metric::Euclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) {
      const double d = query[i] - stored[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  return 1.0 - dot(query, stored) / (query_norm * stored_norm);
}

}  // namespace

void LabeledSet::validate() const {
  std::unordered_set<std::string> space(label_space.begin(), label_space.end());
  if (space.size() != label_space.size()) throw Error(Errc::Malformed, "duplicate label in label space");
  for (const auto& s : samples) {
    if (!space.count(s.label)) {
      throw Error(Errc::Malformed, s.id + ": label '" + s.label + "' outside the label space");
    }
  }
}

std::string_view to_string(ClassifierKind kind) noexcept {
  return kind == ClassifierKind::Knn ? "knn" : "centroid";
}

ClassifierKind parse_classifier_kind(std::string_view name) {
  const auto key = detail::fold(name);
  if (key == "knn") return ClassifierKind::Knn;
  if (key == "centroid") return ClassifierKind::Centroid;
  throw Error(Errc::InvalidArgument, "classifier must be 'knn' or 'centroid'");
}

nlohmann::json to_json(const ClassifierConfig& cfg) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(cfg.kind));
  j["k"] = cfg.k;
  j["metric"] = std::string(to_string(cfg.metric));
  j["max_per_class"] = cfg.max_per_class ? nlohmann::json(*cfg.max_per_class) : nlohmann::json();
  return j;
}

ClassifierConfig classifier_from_json(const nlohmann::json& j) {
  ClassifierConfig cfg;
  try {
    if (j.contains("kind")) cfg.kind = parse_classifier_kind(j.at("kind").get<std::string>());
    cfg.k = j.value("k", cfg.k);
    if (j.contains("metric")) cfg.metric = parse_metric(j.at("metric").get<std::string>());
    if (auto it = j.find("max_per_class"); it != j.end() && !it->is_null()) {
      cfg.max_per_class = it->get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidArgument, std::string("classifier config: ") + e.what());
  }
  if (cfg.k == 0) throw Error(Errc::BadK, "k must be positive");
  return cfg;
}

// --- model -------------------------------------------------------------------

ClassifierModel fit(const LabeledSet& train, const ClassifierConfig& config) {
  train.validate();
  if (train.samples.empty()) throw Error(Errc::EmptyTraining, "training set is empty");

  ClassifierModel model;
  model.config_ = config;
  model.labels_ = train.label_space;
  model.dim_ = train.samples.front().vector.size();
  if (model.dim_ == 0) throw Error(Errc::BadDim, "training vectors are empty");

  std::unordered_map<std::string, std::size_t> kept;
  for (const auto& s : train.samples) {
    check_vector(s.vector, model.dim_);
    if (config.max_per_class && kept[s.label] >= *config.max_per_class) continue;
    ++kept[s.label];
    model.samples_.push_back(s);
  }
  if (model.samples_.empty()) throw Error(Errc::EmptyTraining, "class cap removed every sample");
  model.training_size_ = model.samples_.size();

  if (config.kind == ClassifierKind::Knn) {
    if (config.k == 0 || config.k > model.samples_.size()) {
      throw Error(Errc::BadK, "k=" + std::to_string(config.k) + " with " +
                                  std::to_string(model.samples_.size()) + " training samples");
    }
    if (config.metric == Metric::Cosine) {
      for (const auto& s : model.samples_) {
        const double n = l2_norm(s.vector);
        if (n == 0.0) throw Error(Errc::ZeroVector, s.id + ": zero training vector under cosine");
        model.sample_norms_.push_back(n);
      }
    }
    return model;
  }

  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < model.labels_.size(); ++i) slot.emplace(model.labels_[i], i);
  model.centroids_.assign(model.labels_.size(), Vector(model.dim_, 0.0));
  std::vector<std::size_t> counts(model.labels_.size(), 0);
  for (const auto& s : model.samples_) {
    const auto c = slot.at(s.label);
    for (std::size_t d = 0; d < model.dim_; ++d) model.centroids_[c][d] += s.vector[d];
    ++counts[c];
  }
  for (std::size_t c = 0; c < model.labels_.size(); ++c) {
    if (counts[c] == 0) throw Error(Errc::EmptyClass, "no training samples for '" + model.labels_[c] + "'");
    for (double& x : model.centroids_[c]) x /= static_cast<double>(counts[c]);
    const double n = l2_norm(model.centroids_[c]);
    if (config.metric == Metric::Cosine && n == 0.0) {
      throw Error(Errc::ZeroVector, "centroid of '" + model.labels_[c] + "' is zero");
    }
    model.centroid_norms_.push_back(n);
  }
  model.samples_.clear();
  model.samples_.shrink_to_fit();
  return model;
}

const Vector& ClassifierModel::centroid(std::string_view label) const {
  if (config_.kind != ClassifierKind::Centroid) {
    throw Error(Errc::InvalidArgument, "not a centroid model");
  }
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return centroids_[i];
  }
  throw Error(Errc::InvalidArgument, "unknown label '" + std::string(label) + "'");
}

const std::string& ClassifierModel::predict(std::span<const double> query) const {
  if (query.size() != dim_) {
    throw Error(Errc::BadDim, "query has " + std::to_string(query.size()) + " dimensions, model " +
                                  std::to_string(dim_));
  }
  check_vector(query, dim_);
  double query_norm = 0.0;
  if (config_.metric == Metric::Cosine) {
    query_norm = l2_norm(query);
    if (query_norm == 0.0) throw Error(Errc::ZeroVector, "zero query vector under cosine");
  }

  if (config_.kind == ClassifierKind::Centroid) {
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t c = 0; c < centroids_.size(); ++c) {
      const double d =
          distance_with_norm(query, query_norm, centroids_[c], centroid_norms_[c], config_.metric);
      if (c == 0 || d < best_d || (d == best_d && labels_[c] < labels_[best])) {
        best = c;
        best_d = d;
      }
    }
    return labels_[best];
  }

  const std::size_t n = samples_.size();
  std::vector<std::pair<double, std::size_t>> ranked(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double norm_i = sample_norms_.empty() ? 0.0 : sample_norms_[i];
    ranked[i] = {distance_with_norm(query, query_norm, samples_[i].vector, norm_i, config_.metric), i};
  }
  const auto k = static_cast<std::ptrdiff_t>(config_.k);
  std::partial_sort(ranked.begin(), ranked.begin() + k, ranked.end());

  struct Tally {
    std::size_t votes = 0;
    double distance_sum = 0.0;
    std::size_t sample = 0;
  };
  std::map<std::string_view, Tally> tally;
  for (std::ptrdiff_t i = 0; i < k; ++i) {
    const auto idx = ranked[i].second;
    auto& t = tally[samples_[idx].label];
    t.sample = idx;
    ++t.votes;
    t.distance_sum += ranked[i].first;
  }
  // std::map iterates labels in lexicographic order, so strict comparisons
  // keep the lexicographically smallest label on a full tie.
  auto best = tally.begin();
  for (auto it = std::next(tally.begin()); it != tally.end(); ++it) {
    if (it->second.votes > best->second.votes ||
        (it->second.votes == best->second.votes &&
         it->second.distance_sum < best->second.distance_sum)) {
      best = it;
    }
  }
  return samples_[best->second.sample].label;
}

// --- tasks ---------------------------------------------------------------------

std::vector<Prediction> run_task(const LabeledSet& train, std::span<const Sample> test,
                                 const std::set<std::string>& exclusions,
                                 const ClassifierConfig& config) {
  LabeledSet kept;
  for (const auto& label : train.label_space) {
    if (!exclusions.count(label)) kept.label_space.push_back(label);
  }
  for (const auto& s : train.samples) {
    if (!exclusions.count(s.label)) kept.samples.push_back(s);
  }
  if (kept.samples.empty()) throw Error(Errc::EmptyTraining, "exclusions removed all training data");

  const auto model = fit(kept, config);
  std::vector<Prediction> out;
  out.reserve(test.size());
  for (const auto& s : test) out.push_back({s.id, s.label, model.predict(s.vector)});
  std::sort(out.begin(), out.end(),
            [](const Prediction& a, const Prediction& b) { return a.id < b.id; });
  return out;
}

std::string_view task_description(int task) {
  switch (task) {
    case 1: return "train: disorder+control IUP; test: disorder+control distilled";
    case 2: return "train: disorder+control distilled; test: disorder+control IUP";
    case 3: return "train: disorder+control IUP; test: hate+control distilled";
    case 4: return "train: disorder+control IUP; test: misinformation+control distilled";
    default: return "unknown task";
  }
}

TaskData build_task(int task, std::span<const EmbeddingRecord> records, const Registry& registry) {
  if (task < 1 || task > 4) throw Error(Errc::InvalidArgument, "task must be 1, 2, 3 or 4");
  const auto train_source = task == 2 ? EmbeddingSource::Distilled : EmbeddingSource::Iup;
  const auto test_source = task == 2 ? EmbeddingSource::Iup : EmbeddingSource::Distilled;
  auto train_kind = [](CategoryKind k) {
    return k == CategoryKind::Disorder || k == CategoryKind::Control;
  };
  auto test_kind = [task](CategoryKind k) {
    if (k == CategoryKind::Control) return true;
    switch (task) {
      case 3: return k == CategoryKind::HateSpeech;
      case 4: return k == CategoryKind::Misinformation;
      default: return k == CategoryKind::Disorder;
    }
  };

  TaskData data;
  data.task = task;
  std::set<std::string> present;
  std::unordered_set<std::string> train_posts;
  for (const auto& r : records) {
    if (r.source == train_source && train_kind(r.category.kind)) {
      data.train.samples.push_back({r.id, r.vector, r.category.label()});
      present.insert(r.category.label());
      train_posts.insert(r.post_ids.begin(), r.post_ids.end());
    }
  }
  for (const auto& r : records) {
    if (r.source == test_source && test_kind(r.category.kind)) {
      data.test.push_back({r.id, r.vector, r.category.label()});
      if (std::any_of(r.post_ids.begin(), r.post_ids.end(),
                      [&](const std::string& p) { return train_posts.count(p) > 0; })) {
        ++data.overlapping_test_records;
      }
    }
  }

  for (const auto& sub : registry.subclass_catalog()) {
    if (present.erase(sub)) data.train.label_space.push_back(sub);
  }
  const bool has_control = present.erase("Control") > 0;
  for (const auto& rest : present) data.train.label_space.push_back(rest);
  if (has_control) data.train.label_space.push_back("Control");
  return data;
}

// --- evaluation ----------------------------------------------------------------

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

std::size_t ConfusionMatrix::row_sum(std::size_t i) const {
  return std::accumulate(counts[i].begin(), counts[i].end(), std::size_t{0});
}

std::size_t ConfusionMatrix::col_sum(std::size_t j) const {
  std::size_t s = 0;
  for (const auto& row : counts) s += row[j];
  return s;
}

std::optional<std::size_t> ConfusionMatrix::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return i;
  }
  return std::nullopt;
}

ConfusionMatrix confusion_matrix(std::span<const Prediction> predictions,
                                 std::span<const std::string> label_order) {
  ConfusionMatrix m;
  m.labels.assign(label_order.begin(), label_order.end());
  std::unordered_map<std::string, std::size_t> slot;
  for (std::size_t i = 0; i < m.labels.size(); ++i) slot.emplace(m.labels[i], i);

  std::set<std::string> extra;
  for (const auto& p : predictions) {
    if (!slot.count(p.truth)) extra.insert(p.truth);
    if (!slot.count(p.predicted)) extra.insert(p.predicted);
  }
  for (const auto& e : extra) {
    slot.emplace(e, m.labels.size());
    m.labels.push_back(e);
  }

  m.counts.assign(m.labels.size(), std::vector<std::size_t>(m.labels.size(), 0));
  for (const auto& p : predictions) ++m.counts[slot.at(p.truth)][slot.at(p.predicted)];
  return m;
}

ClassificationReport classification_report(const ConfusionMatrix& matrix,
                                           std::optional<std::span<const std::string>> labels) {
  ClassificationReport report;
  report.total = matrix.total();
  if (report.total == 0) throw Error(Errc::EmptyMatrix, "confusion matrix has no records");

  std::size_t trace = 0;
  for (std::size_t i = 0; i < matrix.labels.size(); ++i) trace += matrix.counts[i][i];
  report.accuracy = static_cast<double>(trace) / static_cast<double>(report.total);

  const std::vector<std::string> chosen =
      labels ? std::vector<std::string>(labels->begin(), labels->end()) : matrix.labels;
  for (const auto& label : chosen) {
    ClassScores s;
    s.label = label;
    if (auto idx = matrix.index_of(label)) {
      const auto tp = static_cast<double>(matrix.counts[*idx][*idx]);
      const auto predicted = static_cast<double>(matrix.col_sum(*idx));
      s.support = matrix.row_sum(*idx);
      s.precision = predicted == 0.0 ? 0.0 : tp / predicted;
      s.recall = s.support == 0 ? 0.0 : tp / static_cast<double>(s.support);
      s.f1 = s.precision + s.recall == 0.0 ? 0.0
                                           : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    report.total_support += s.support;
    report.classes.push_back(std::move(s));
  }

  if (!report.classes.empty()) {
    const auto n = static_cast<double>(report.classes.size());
    for (const auto& s : report.classes) {
      report.macro_avg.precision += s.precision / n;
      report.macro_avg.recall += s.recall / n;
      report.macro_avg.f1 += s.f1 / n;
    }
  }
  if (report.total_support > 0) {
    const auto w = static_cast<double>(report.total_support);
    for (const auto& s : report.classes) {
      const auto share = static_cast<double>(s.support) / w;
      report.weighted_avg.precision += s.precision * share;
      report.weighted_avg.recall += s.recall * share;
      report.weighted_avg.f1 += s.f1 * share;
    }
  }
  return report;
}

CompositionSummary composition_summary(std::span<const Prediction> predictions,
                                       const std::map<std::string, std::string>& grouping,
                                       std::string focus_group) {
  if (predictions.empty()) throw Error(Errc::EmptyMatrix, "no predictions");
  CompositionSummary out;
  out.total = predictions.size();
  out.focus_group = std::move(focus_group);

  std::map<std::string, std::size_t> by_group, by_label, focus_by_label;
  for (const auto& p : predictions) {
    auto g = grouping.find(p.predicted);
    if (g == grouping.end()) {
      throw Error(Errc::InvalidArgument, "label '" + p.predicted + "' has no group");
    }
    ++by_group[g->second];
    ++by_label[p.predicted];
    if (g->second == out.focus_group) {
      ++out.focus_total;
      ++focus_by_label[p.predicted];
    }
  }
  const auto total = static_cast<double>(out.total);
  for (const auto& [k, v] : by_group) out.group_fraction[k] = static_cast<double>(v) / total;
  for (const auto& [k, v] : by_label) out.label_fraction[k] = static_cast<double>(v) / total;
  for (const auto& [k, v] : focus_by_label) {
    out.focus_label_fraction[k] = static_cast<double>(v) / static_cast<double>(out.focus_total);
  }
  return out;
}

}  // namespace mapscope

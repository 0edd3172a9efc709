#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mapscope/embed.hpp"
#include "mapscope/metric.hpp"
#include "mapscope/registry.hpp"

namespace mapscope {

struct Sample {
  std::string id;
  Vector vector;
  std::string label;
};

/// Training or test data with a fixed label order (the report row order).
struct LabeledSet {
  std::vector<Sample> samples;
  std::vector<std::string> label_space;

  /// Throws Errc::Malformed if a sample's label is outside label_space.
  void validate() const;
};

enum class ClassifierKind { Knn, Centroid };

std::string_view to_string(ClassifierKind kind) noexcept;
ClassifierKind parse_classifier_kind(std::string_view name);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::Knn;
  std::size_t k = 5;
  Metric metric = Metric::Cosine;
  /// Keep at most this many training samples per label (first in order).
  std::optional<std::size_t> max_per_class;
};

nlohmann::json to_json(const ClassifierConfig& cfg);
ClassifierConfig classifier_from_json(const nlohmann::json& j);

class ClassifierModel {
 public:
  /// k-NN: majority among the k nearest (ties: smaller summed distance, then
  /// lexicographic label). Centroid: nearest class mean (ties: lexicographic).
  /// Throws Errc::BadDim, Errc::BadVector, Errc::ZeroVector.
  const std::string& predict(std::span<const double> query) const;

  ClassifierKind kind() const noexcept { return config_.kind; }
  const ClassifierConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::size_t training_size() const noexcept { return training_size_; }
  std::size_t dim() const noexcept { return dim_; }
  /// Centroid models only; throws Errc::InvalidArgument otherwise.
  const Vector& centroid(std::string_view label) const;

 private:
  friend ClassifierModel fit(const LabeledSet&, const ClassifierConfig&);

  ClassifierConfig config_;
  std::size_t dim_ = 0;
  std::size_t training_size_ = 0;
  std::vector<std::string> labels_;
  std::vector<Sample> samples_;        // knn
  std::vector<Vector> centroids_;      // centroid, aligned with labels_
  std::vector<double> sample_norms_;   // knn + cosine
  std::vector<double> centroid_norms_;
};

/// Throws Errc::EmptyTraining, Errc::EmptyClass (centroid), Errc::BadK.
ClassifierModel fit(const LabeledSet& train, const ClassifierConfig& config);

struct Prediction {
  std::string id;
  std::string truth;
  std::string predicted;

  bool operator==(const Prediction&) const = default;
};

/// Drops excluded labels from training (never from test truth), fits, and
/// predicts every test sample. Output is sorted by record id.
/// Throws Errc::EmptyTraining when exclusions leave nothing to train on.
std::vector<Prediction> run_task(const LabeledSet& train, std::span<const Sample> test,
                                 const std::set<std::string>& exclusions,
                                 const ClassifierConfig& config);

/// The four train/test designs over IUP and distilled embeddings.
struct TaskData {
  int task = 1;
  LabeledSet train;
  std::vector<Sample> test;
  /// Test records sharing at least one post id with a training record.
  std::size_t overlapping_test_records = 0;
};

std::string_view task_description(int task);

/// Task 1: disorder+control IUP -> disorder+control distilled.
/// Task 2: disorder+control distilled -> disorder+control IUP.
/// Task 3: disorder+control IUP -> hate+control distilled.
/// Task 4: disorder+control IUP -> misinformation+control distilled.
/// Labels are Category::label(); the label space follows the registry's
/// subclass catalog with Control last. Throws Errc::InvalidArgument.
TaskData build_task(int task, std::span<const EmbeddingRecord> records, const Registry& registry);

/// counts[i][j] = records with truth labels[i] predicted labels[j].
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t row_sum(std::size_t i) const;
  std::size_t col_sum(std::size_t j) const;
  std::optional<std::size_t> index_of(std::string_view label) const;
};

/// Rows and columns follow `label_order`; labels seen in the predictions but
/// absent from it (e.g. zero-shot truth classes) are appended, sorted.
ConfusionMatrix confusion_matrix(std::span<const Prediction> predictions,
                                 std::span<const std::string> label_order);

struct ClassScores {
  std::string label;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct AverageScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassificationReport {
  std::vector<ClassScores> classes;
  double accuracy = 0.0;
  AverageScores macro_avg;
  AverageScores weighted_avg;
  std::size_t total_support = 0;
  std::size_t total = 0;
};

/// Scores for `labels` (default: every matrix label). Precision counts false
/// positives from every row, accuracy is trace / total over the whole matrix.
/// All 0/0 ratios are 0. Throws Errc::EmptyMatrix.
ClassificationReport classification_report(
    const ConfusionMatrix& matrix,
    std::optional<std::span<const std::string>> labels = std::nullopt);

struct CompositionSummary {
  std::size_t total = 0;
  std::map<std::string, double> group_fraction;
  std::map<std::string, double> label_fraction;
  std::string focus_group;
  std::size_t focus_total = 0;
  std::map<std::string, double> focus_label_fraction;
};

/// Share of predictions per group and per predicted label, over all records
/// and over the records predicted into `focus_group`.
/// Throws Errc::EmptyMatrix, Errc::InvalidArgument (label with no group).
CompositionSummary composition_summary(std::span<const Prediction> predictions,
                                       const std::map<std::string, std::string>& grouping,
                                       std::string focus_group = "Disorder");

// Presentation (report_io.cpp).
nlohmann::ordered_json report_to_json(const ClassificationReport& report);
/// Aligned text table: Category / Precision / Recall / f1-Score / Support,
/// two decimals, then Accuracy, Macro Average and Weighted Average rows.
std::string report_to_text(const ClassificationReport& report);
std::string confusion_to_csv(const ConfusionMatrix& matrix);
nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& matrix);
std::string predictions_to_jsonl(std::span<const Prediction> predictions);
nlohmann::ordered_json composition_to_json(const CompositionSummary& summary);

}  // namespace mapscope

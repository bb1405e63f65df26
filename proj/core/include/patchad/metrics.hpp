#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "patchad/errors.hpp"

namespace patchad {

// A metric that has no defined value on the given input (e.g. AUC with one class).
class MetricUndefined : public DomainError {
 public:
  using DomainError::DomainError;
};

using Binary = std::vector<std::uint8_t>;

// Marks a whole ground-truth segment predicted when any point inside is.
Binary point_adjust(const Binary& pred, const Binary& gt);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double acc = 0.0;
  Confusion counts;
};

Confusion confusion(const Binary& pred, const Binary& gt);
// 0/0 precision, recall and F1 are 0.
Prf prf(const Binary& pred, const Binary& gt);

// Mann-Whitney form, ties count 1/2. Throws MetricUndefined for one class.
double roc_auc(const std::vector<double>& scores, const Binary& gt);

// Half-open index range [begin, end).
struct Event {
  std::size_t begin = 0;
  std::size_t end = 0;
  bool operator==(const Event&) const = default;
};

// Maximal runs of ones.
std::vector<Event> to_events(const Binary& labels);

struct Affiliation {
  std::optional<double> precision;  // nullopt when no zone holds a prediction
  double recall = 0.0;
  std::optional<double> f1;
};

// Event i covers the continuous interval [begin, end). Throws MetricUndefined
// when there are no ground-truth events.
Affiliation affiliation_metrics(const std::vector<Event>& pred, const std::vector<Event>& gt,
                                std::size_t length);

// Each segment gains a ramp of width l on both sides: distance d in 1..l
// outside the segment gets 1 - (d - 1) / l. Overlaps take the max.
std::vector<double> range_smooth_labels(const Binary& gt, std::size_t l);

// ROC / PR areas with label mass as weights (trapezoid over distinct scores).
double weighted_roc_auc(const std::vector<double>& scores, const std::vector<double>& labels);
double weighted_pr_auc(const std::vector<double>& scores, const std::vector<double>& labels);

// 4 x mean segment length, rounded, capped at 250.
std::size_t default_vus_l_max(const Binary& gt);

struct Vus {
  double roc = 0.0;
  double pr = 0.0;
  std::size_t l_max = 0;
};
Vus vus(const std::vector<double>& scores, const Binary& gt, std::optional<std::size_t> l_max = std::nullopt);

struct EvalOptions {
  double sigma = 1.0;               // ratio threshold, percent
  std::optional<Binary> flags;      // precomputed decisions (e.g. SPOT); overrides sigma
  std::optional<double> threshold;  // reported with precomputed flags
  std::optional<std::size_t> vus_l_max;
};

struct EvalReport {
  // Point-adjusted acc / precision / recall / F1, raw F1.
  std::optional<double> acc;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> pa_f1;
  std::optional<double> f1_cls;
  std::optional<double> auc;
  std::optional<double> aff_precision;
  std::optional<double> aff_recall;
  std::optional<double> aff_f1;
  std::optional<double> vus_roc;
  std::optional<double> vus_pr;
  std::optional<double> threshold;
  std::optional<double> sigma;
  std::size_t vus_l_max = 0;
  Confusion raw;
  Confusion adjusted;
  // Field name -> reason, for every field left empty.
  std::map<std::string, std::string> gaps;
};

EvalReport evaluate(const std::vector<double>& scores, const Binary& gt, const EvalOptions& options = {});

}  // namespace patchad

#include "patchad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "patchad/scoring.hpp"

namespace patchad {

namespace {

void require_equal_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw ContractError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void require_binary(const Binary& v, const char* op) {
  for (auto x : v) {
    if (x > 1) throw ContractError(std::string(op) + ": labels must be 0 or 1");
  }
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

Binary point_adjust(const Binary& pred, const Binary& gt) {
  require_equal_length(pred.size(), gt.size(), "point_adjust");
  Binary out = pred;
  for (const Event& ev : to_events(gt)) {
    const bool hit = std::any_of(pred.begin() + static_cast<std::ptrdiff_t>(ev.begin),
                                 pred.begin() + static_cast<std::ptrdiff_t>(ev.end), [](auto v) { return v != 0; });
    if (hit) std::fill(out.begin() + static_cast<std::ptrdiff_t>(ev.begin), out.begin() + static_cast<std::ptrdiff_t>(ev.end), 1);
  }
  return out;
}

Confusion confusion(const Binary& pred, const Binary& gt) {
  require_equal_length(pred.size(), gt.size(), "confusion");
  Confusion c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Prf prf(const Binary& pred, const Binary& gt) {
  Prf r;
  r.counts = confusion(pred, gt);
  const auto& c = r.counts;
  r.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = f1_of(r.precision, r.recall);
  const std::size_t n = c.tp + c.fp + c.fn + c.tn;
  r.acc = n ? static_cast<double>(c.tp + c.tn) / static_cast<double>(n) : 0.0;
  return r;
}

double roc_auc(const std::vector<double>& scores, const Binary& gt) {
  require_equal_length(scores.size(), gt.size(), "roc_auc");
  require_binary(gt, "roc_auc");
  for (double s : scores) {
    if (!std::isfinite(s)) throw InputError("roc_auc: non-finite score");
  }
  const std::size_t n = scores.size();
  const auto pos = static_cast<std::size_t>(std::count(gt.begin(), gt.end(), 1));
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw MetricUndefined("roc_auc is undefined when labels hold a single class");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of average ranks of the positives.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (gt[idx[k]]) rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(pos), q = static_cast<double>(neg);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

std::vector<Event> to_events(const Binary& labels) {
  std::vector<Event> out;
  for (std::size_t i = 0; i < labels.size();) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < labels.size() && labels[j]) ++j;
    out.push_back({i, j});
    i = j;
  }
  return out;
}

namespace {

struct Span {
  double lo;
  double hi;
};

std::vector<Span> normalise_events(std::vector<Event> events, std::size_t length, const char* what) {
  std::sort(events.begin(), events.end(), [](const Event& a, const Event& b) { return a.begin < b.begin; });
  std::vector<Span> out;
  for (const auto& e : events) {
    if (e.end <= e.begin || e.end > length) {
      throw ContractError(std::string("affiliation: ") + what + " event [" + std::to_string(e.begin) + ", " +
                          std::to_string(e.end) + ") is empty or outside the series");
    }
    const double lo = static_cast<double>(e.begin), hi = static_cast<double>(e.end);
    if (!out.empty() && lo <= out.back().hi) {
      out.back().hi = std::max(out.back().hi, hi);
    } else {
      out.push_back({lo, hi});
    }
  }
  return out;
}

// Trapezoid integral over consecutive breakpoints; exact when f is linear on
// each piece. f receives the piece midpoint to choose a one-sided branch.
template <typename F>
double integrate_pieces(std::vector<double> cuts, F&& f) {
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double p = cuts[i], q = cuts[i + 1];
    const double mid = 0.5 * (p + q);
    total += 0.5 * (q - p) * (f(p, mid) + f(q, mid));
  }
  return total;
}

void add_cut(std::vector<double>& cuts, double x, double lo, double hi) {
  if (x > lo && x < hi) cuts.push_back(x);
}

double zone_precision(const std::vector<Span>& preds, const Span& gt, double a, double b) {
  const double s = gt.lo, e = gt.hi, width = b - a;
  auto survival = [&](double d) { return (std::max(0.0, s - d - a) + std::max(0.0, b - e - d)) / width; };
  auto f = [&](double x, double mid) {
    if (mid < s) return survival(s - x);
    if (mid >= e) return survival(x - e);
    return 1.0;
  };
  double integral = 0.0, measure = 0.0;
  for (const auto& p : preds) {
    const double u = std::max(p.lo, a), v = std::min(p.hi, b);
    if (!(v > u)) continue;
    std::vector<double> cuts{u, v};
    for (double x : {s, e, s + e - b, s + e - a}) add_cut(cuts, x, u, v);
    integral += integrate_pieces(cuts, f);
    measure += v - u;
  }
  return measure > 0.0 ? integral / measure : -1.0;
}

double zone_recall(const std::vector<Span>& preds, const Span& gt, double a, double b) {
  std::vector<Span> in_zone;
  for (const auto& p : preds) {
    const double u = std::max(p.lo, a), v = std::min(p.hi, b);
    if (v > u) in_zone.push_back({u, v});
  }
  if (in_zone.empty()) return 0.0;
  const double s = gt.lo, e = gt.hi, width = b - a;
  auto dist = [&](double y) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : in_zone) {
      const double di = y < p.lo ? p.lo - y : (y > p.hi ? y - p.hi : 0.0);
      d = std::min(d, di);
    }
    return d;
  };
  auto g1 = [&](double y) { return y - dist(y) - a; };
  auto g2 = [&](double y) { return b - y - dist(y); };
  std::vector<double> cuts{s, e};
  for (std::size_t i = 0; i < in_zone.size(); ++i) {
    add_cut(cuts, in_zone[i].lo, s, e);
    add_cut(cuts, in_zone[i].hi, s, e);
    if (i + 1 < in_zone.size()) add_cut(cuts, 0.5 * (in_zone[i].hi + in_zone[i + 1].lo), s, e);
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> roots;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double p = cuts[i], q = cuts[i + 1];
    const double a1 = g1(p), b1 = g1(q);
    if ((a1 < 0.0) != (b1 < 0.0)) roots.push_back(p + (q - p) * a1 / (a1 - b1));
    const double a2 = g2(p), b2 = g2(q);
    if ((a2 < 0.0) != (b2 < 0.0)) roots.push_back(p + (q - p) * a2 / (a2 - b2));
  }
  for (double r : roots) add_cut(cuts, r, s, e);
  auto f = [&](double y, double) {
    const double d = dist(y);
    return (std::max(0.0, y - d - a) + std::max(0.0, b - y - d)) / width;
  };
  return integrate_pieces(cuts, f) / (e - s);
}

}  // namespace

Affiliation affiliation_metrics(const std::vector<Event>& pred, const std::vector<Event>& gt, std::size_t length) {
  const auto gts = normalise_events(gt, length, "ground-truth");
  const auto preds = normalise_events(pred, length, "predicted");
  if (gts.empty()) throw MetricUndefined("affiliation metrics are undefined without ground-truth events");
  const double L = static_cast<double>(length);
  double p_sum = 0.0, r_sum = 0.0;
  std::size_t p_zones = 0;
  for (std::size_t j = 0; j < gts.size(); ++j) {
    const double a = j == 0 ? 0.0 : 0.5 * (gts[j - 1].hi + gts[j].lo);
    const double b = j + 1 == gts.size() ? L : 0.5 * (gts[j].hi + gts[j + 1].lo);
    const double p = zone_precision(preds, gts[j], a, b);
    if (p >= 0.0) {
      p_sum += p;
      ++p_zones;
    }
    r_sum += zone_recall(preds, gts[j], a, b);
  }
  Affiliation out;
  out.recall = r_sum / static_cast<double>(gts.size());
  if (p_zones) {
    out.precision = p_sum / static_cast<double>(p_zones);
    out.f1 = f1_of(*out.precision, out.recall);
  }
  return out;
}

std::vector<double> range_smooth_labels(const Binary& gt, std::size_t l) {
  require_binary(gt, "range_smooth_labels");
  const std::size_t n = gt.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = gt[i] ? 1.0 : 0.0;
  if (l == 0) return out;
  for (const Event& ev : to_events(gt)) {
    for (std::size_t d = 1; d <= l; ++d) {
      const double v = 1.0 - static_cast<double>(d - 1) / static_cast<double>(l);
      if (ev.begin >= d) out[ev.begin - d] = std::max(out[ev.begin - d], v);
      if (ev.end - 1 + d < n) out[ev.end - 1 + d] = std::max(out[ev.end - 1 + d], v);
    }
  }
  return out;
}

namespace {

struct CurvePoint {
  double tp;
  double fp;
};

// Cumulative label mass at each distinct score, highest score first.
std::vector<CurvePoint> sweep(const std::vector<double>& scores, const std::vector<double>& labels, double& pos,
                              double& neg) {
  require_equal_length(scores.size(), labels.size(), "weighted curve");
  pos = 0.0;
  neg = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InputError("non-finite score");
    if (!(labels[i] >= 0.0 && labels[i] <= 1.0)) throw ContractError("labels must lie in [0, 1]");
    pos += labels[i];
    neg += 1.0 - labels[i];
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<CurvePoint> pts;
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      tp += labels[idx[j]];
      fp += 1.0 - labels[idx[j]];
      ++j;
    }
    pts.push_back({tp, fp});
    i = j;
  }
  return pts;
}

}  // namespace

double weighted_roc_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
  double pos, neg;
  const auto pts = sweep(scores, labels, pos, neg);
  if (!(pos > 0.0) || !(neg > 0.0)) throw MetricUndefined("ROC area is undefined when labels hold a single class");
  double area = 0.0, x0 = 0.0, y0 = 0.0;
  for (const auto& p : pts) {
    const double x = p.fp / neg, y = p.tp / pos;
    area += (x - x0) * (y + y0) * 0.5;
    x0 = x;
    y0 = y;
  }
  return area;
}

double weighted_pr_auc(const std::vector<double>& scores, const std::vector<double>& labels) {
  double pos, neg;
  const auto pts = sweep(scores, labels, pos, neg);
  if (!(pos > 0.0)) throw MetricUndefined("PR area is undefined without positive labels");
  double area = 0.0;
  double r0 = 0.0, p0 = pts.front().tp / (pts.front().tp + pts.front().fp);
  for (const auto& p : pts) {
    const double r = p.tp / pos, prec = p.tp / (p.tp + p.fp);
    area += (r - r0) * (prec + p0) * 0.5;
    r0 = r;
    p0 = prec;
  }
  return area;
}

std::size_t default_vus_l_max(const Binary& gt) {
  const auto events = to_events(gt);
  if (events.empty()) return 0;
  double total = 0.0;
  for (const auto& e : events) total += static_cast<double>(e.end - e.begin);
  const double mean_len = total / static_cast<double>(events.size());
  return std::min<std::size_t>(250, static_cast<std::size_t>(std::lround(4.0 * mean_len)));
}

Vus vus(const std::vector<double>& scores, const Binary& gt, std::optional<std::size_t> l_max) {
  require_equal_length(scores.size(), gt.size(), "vus");
  Vus out;
  out.l_max = l_max.value_or(default_vus_l_max(gt));
  std::vector<double> roc, pr;
  for (std::size_t l = 0; l <= out.l_max; ++l) {
    const auto labels = range_smooth_labels(gt, l);
    roc.push_back(weighted_roc_auc(scores, labels));
    pr.push_back(weighted_pr_auc(scores, labels));
  }
  if (out.l_max == 0) {
    out.roc = roc[0];
    out.pr = pr[0];
    return out;
  }
  auto trapezoid = [&](const std::vector<double>& v) {
    double acc = 0.5 * (v.front() + v.back());
    for (std::size_t i = 1; i + 1 < v.size(); ++i) acc += v[i];
    return acc / static_cast<double>(out.l_max);
  };
  out.roc = trapezoid(roc);
  out.pr = trapezoid(pr);
  return out;
}

EvalReport evaluate(const std::vector<double>& scores, const Binary& gt, const EvalOptions& options) {
  require_equal_length(scores.size(), gt.size(), "evaluate");
  require_binary(gt, "evaluate");
  if (scores.empty()) throw ContractError("evaluate: empty input");
  EvalReport rep;
  Binary pred;
  if (options.flags) {
    require_equal_length(options.flags->size(), gt.size(), "evaluate flags");
    pred = *options.flags;
    rep.threshold = options.threshold;
    if (!rep.threshold) rep.gaps["threshold"] = "precomputed flags carry no single threshold";
  } else {
    const Thresholded th = threshold_by_ratio(scores, options.sigma);
    pred = th.flags;
    rep.threshold = th.threshold;
    rep.sigma = options.sigma;
  }
  const Prf raw = prf(pred, gt);
  const Prf adj = prf(point_adjust(pred, gt), gt);
  rep.raw = raw.counts;
  rep.adjusted = adj.counts;
  rep.acc = adj.acc;
  rep.precision = adj.precision;
  rep.recall = adj.recall;
  rep.pa_f1 = adj.f1;
  rep.f1_cls = raw.f1;

  try {
    rep.auc = roc_auc(scores, gt);
  } catch (const MetricUndefined& e) {
    rep.gaps["auc"] = e.what();
  }
  try {
    const Affiliation aff = affiliation_metrics(to_events(pred), to_events(gt), gt.size());
    rep.aff_recall = aff.recall;
    rep.aff_precision = aff.precision;
    rep.aff_f1 = aff.f1;
    if (!aff.precision) {
      rep.gaps["aff_precision"] = "no predicted events inside any affiliation zone";
      rep.gaps["aff_f1"] = "affiliation precision is undefined";
    }
  } catch (const MetricUndefined& e) {
    rep.gaps["aff_precision"] = e.what();
    rep.gaps["aff_recall"] = e.what();
    rep.gaps["aff_f1"] = e.what();
  }
  try {
    const Vus v = vus(scores, gt, options.vus_l_max);
    rep.vus_roc = v.roc;
    rep.vus_pr = v.pr;
    rep.vus_l_max = v.l_max;
  } catch (const MetricUndefined& e) {
    rep.gaps["vus_roc"] = e.what();
    rep.gaps["vus_pr"] = e.what();
  }
  return rep;
}

}  // namespace patchad

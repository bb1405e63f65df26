#include "patchad/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include "patchad/errors.hpp"
#include "patchad/io.hpp"

namespace patchad {

ZScore::ZScore(std::vector<double> mean, std::vector<double> stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)) {}

ZScore ZScore::from_stats(std::vector<double> mean, std::vector<double> stddev) {
  if (mean.size() != stddev.size()) {
    throw InputError("normalization stats: " + std::to_string(mean.size()) + " means but " +
                     std::to_string(stddev.size()) + " stds");
  }
  for (double s : stddev) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("normalization stats: invalid std");
  }
  return ZScore(std::move(mean), std::move(stddev));
}

void LabeledSeries::validate() const {
  if (channels == 0 || length == 0) throw InputError("series must have at least one channel and one timestamp");
  if (values.size() != channels * length) {
    throw InputError("series holds " + std::to_string(values.size()) + " values, expected " +
                     std::to_string(channels) + "x" + std::to_string(length));
  }
  if (labels) {
    if (labels->size() != length) {
      throw InputError("labels have length " + std::to_string(labels->size()) + ", series has " +
                       std::to_string(length));
    }
    for (auto l : *labels) {
      if (l > 1) throw InputError("labels must be 0 or 1");
    }
  }
  if (!channel_names.empty() && channel_names.size() != channels) {
    throw InputError("channel name count does not match channel count");
  }
  if (normalization && normalization->channels() != channels) {
    throw InputError("normalization stats do not match channel count");
  }
}

LabeledSeries make_series(std::size_t channels, std::size_t length, std::vector<double> values) {
  LabeledSeries s;
  s.channels = channels;
  s.length = length;
  s.values = std::move(values);
  s.validate();
  return s;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(pos)));
      break;
    }
    cells.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return cells;
}

std::string location(const std::string& source, std::size_t row, std::size_t col) {
  return source + ": row " + std::to_string(row) + ", column " + std::to_string(col);
}

}  // namespace

LabeledSeries parse_csv(const std::string& text, const std::optional<std::string>& label_column,
                        const std::string& source) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      if (!trim(line).empty()) lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  if (lines.empty()) throw ParseError(source + ": empty file (a header row is required)");

  const auto header = split_row(lines[0]);
  std::optional<std::size_t> label_idx;
  if (label_column) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == *label_column) label_idx = i;
    }
    if (!label_idx) throw ParseError(source + ": row 1: label column '" + *label_column + "' not found in header");
  }
  const std::size_t ncols = header.size();
  const std::size_t channels = ncols - (label_idx ? 1 : 0);
  if (channels == 0) throw ParseError(source + ": row 1: no value columns");
  const std::size_t length = lines.size() - 1;
  if (length == 0) throw ParseError(source + ": no data rows");

  LabeledSeries s;
  s.channels = channels;
  s.length = length;
  s.values.resize(channels * length);
  for (std::size_t i = 0; i < ncols; ++i) {
    if (label_idx && i == *label_idx) continue;
    s.channel_names.emplace_back(header[i]);
  }
  std::vector<std::uint8_t> labels;
  if (label_idx) labels.resize(length);

  for (std::size_t r = 0; r < length; ++r) {
    const std::size_t row_no = r + 2;
    const auto cells = split_row(lines[r + 1]);
    if (cells.size() != ncols) {
      throw ParseError(location(source, row_no, std::min(cells.size(), ncols) + 1) + ": expected " +
                       std::to_string(ncols) + " cells, found " + std::to_string(cells.size()));
    }
    std::size_t c = 0;
    for (std::size_t i = 0; i < ncols; ++i) {
      const std::string_view cell = cells[i];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(location(source, row_no, i + 1) + ": non-numeric cell '" + std::string(cell) + "'");
      }
      if (label_idx && i == *label_idx) {
        if (v != 0.0 && v != 1.0) {
          throw ParseError(location(source, row_no, i + 1) + ": label must be 0 or 1, got '" +
                           std::string(cell) + "'");
        }
        labels[r] = static_cast<std::uint8_t>(v);
      } else {
        s.values[c * length + r] = v;
        ++c;
      }
    }
  }
  if (label_idx) s.labels = std::move(labels);
  return s;
}

LabeledSeries load_csv(const std::filesystem::path& path, const std::optional<std::string>& label_column) {
  return parse_csv(read_file(path), label_column, path.string());
}

void save_series_csv(const std::filesystem::path& path, const LabeledSeries& series) {
  series.validate();
  std::string out;
  for (std::size_t c = 0; c < series.channels; ++c) {
    if (c) out += ',';
    out += series.channel_names.empty() ? "c" + std::to_string(c) : series.channel_names[c];
  }
  if (series.labels) out += ",label";
  out += '\n';
  for (std::size_t t = 0; t < series.length; ++t) {
    for (std::size_t c = 0; c < series.channels; ++c) {
      if (c) out += ',';
      out += format_double(series.at(c, t));
    }
    if (series.labels) {
      out += ',';
      out += (*series.labels)[t] ? '1' : '0';
    }
    out += '\n';
  }
  write_file_atomic(path, out);
}

namespace {

constexpr std::uint32_t kSeriesVersion = 1;

}  // namespace

void save_series_binary(const std::filesystem::path& path, const LabeledSeries& series) {
  series.validate();
  ByteWriter w;
  w.raw("PADS");
  w.u32(kSeriesVersion);
  w.u32(static_cast<std::uint32_t>(series.channels));
  w.u64(series.length);
  for (double v : series.values) w.f64(v);
  w.u8(series.labels ? 1 : 0);
  if (series.labels) {
    for (auto l : *series.labels) w.u8(l);
  }
  write_file_atomic(path, w.bytes());
}

LabeledSeries load_series_binary(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes);
  const std::string where = path.string() + ": ";
  try {
    if (r.raw(4, "magic") != "PADS") throw ParseError(where + "bad magic (not a PADS series file)");
    const auto version = r.u32("version");
    if (version != kSeriesVersion) throw ParseError(where + "unsupported version " + std::to_string(version));
    LabeledSeries s;
    s.channels = r.u32("header");
    s.length = r.u64("header");
    if (s.channels == 0 || s.length == 0) throw ParseError(where + "empty shape in header");
    if (r.remaining() / 8 < s.channels * s.length) throw TruncatedInput{"values"};
    s.values.resize(s.channels * s.length);
    for (auto& v : s.values) v = r.f64("values");
    if (r.u8("label flag")) {
      std::vector<std::uint8_t> labels(s.length);
      for (auto& l : labels) {
        l = r.u8("labels");
        if (l > 1) throw ParseError(where + "label byte outside {0,1}");
      }
      s.labels = std::move(labels);
    }
    if (r.remaining() != 0) throw ParseError(where + "trailing bytes after label block");
    return s;
  } catch (const TruncatedInput& t) {
    throw ParseError(where + "truncated in section '" + t.section + "'");
  }
}

void save_scores(const std::filesystem::path& path, const ScoreTable& table) {
  const std::size_t n = table.scores.size();
  if (table.flags.size() != n || table.thresholds.size() != n) {
    throw InputError("save_scores: scores, flags and thresholds differ in length");
  }
  std::string out = "timestamp,score,flag,threshold\n";
  for (std::size_t t = 0; t < n; ++t) {
    out += std::to_string(t);
    out += ',';
    out += format_double(table.scores[t]);
    out += table.flags[t] ? ",1," : ",0,";
    out += format_double(table.thresholds[t]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

ScoreTable load_scores(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  const std::size_t nl = text.find('\n');
  const std::string_view header = trim(std::string_view(text).substr(0, nl));
  if (header != "timestamp,score,flag,threshold") {
    throw ParseError(path.string() + ": row 1: expected header 'timestamp,score,flag,threshold'");
  }
  if (nl == std::string::npos || trim(std::string_view(text).substr(nl + 1)).find_first_not_of("\r\n") ==
                                     std::string_view::npos) {
    return {};
  }
  // Reuse the numeric CSV reader; the flag column doubles as a 0/1 label.
  const LabeledSeries s = parse_csv(text, std::string("flag"), path.string());
  ScoreTable table;
  table.scores.assign(s.values.begin() + static_cast<std::ptrdiff_t>(s.length),
                      s.values.begin() + static_cast<std::ptrdiff_t>(2 * s.length));
  table.thresholds.assign(s.values.begin() + static_cast<std::ptrdiff_t>(2 * s.length), s.values.end());
  table.flags = *s.labels;
  return table;
}

LabeledSeries load_series(const std::filesystem::path& path, const std::optional<std::string>& label_column) {
  if (path.extension() == ".pads") return load_series_binary(path);
  return load_csv(path, label_column);
}

ZScore ZScoreFitter::fit(const LabeledSeries& train) {
  train.validate();
  std::vector<double> mean(train.channels), stddev(train.channels);
  const double n = static_cast<double>(train.length);
  for (std::size_t c = 0; c < train.channels; ++c) {
    const auto ch = train.channel(c);
    const double m = std::accumulate(ch.begin(), ch.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : ch) ss += (v - m) * (v - m);
    mean[c] = m;
    stddev[c] = std::sqrt(ss / n);
  }
  return ZScore(std::move(mean), std::move(stddev));
}

LabeledSeries apply_zscore(const LabeledSeries& series, const ZScore& stats) {
  series.validate();
  if (stats.channels() != series.channels) {
    throw InputError("normalization stats cover " + std::to_string(stats.channels()) +
                     " channels, series has " + std::to_string(series.channels));
  }
  LabeledSeries out = series;
  for (std::size_t c = 0; c < series.channels; ++c) {
    const double m = stats.mean()[c];
    const double s = stats.stddev()[c];
    for (std::size_t t = 0; t < series.length; ++t) {
      const double centered = series.at(c, t) - m;
      out.at(c, t) = s < ZScore::kMinStd ? centered : centered / s;
    }
  }
  out.normalization = stats;
  return out;
}

NormalizedSplit zscore_fit_apply(const LabeledSeries& train, const std::vector<LabeledSeries>& others) {
  NormalizedSplit out{ZScoreFitter::fit(train), {}, {}};
  out.train = apply_zscore(train, out.stats);
  for (const auto& s : others) out.others.push_back(apply_zscore(s, out.stats));
  return out;
}

std::vector<Window> make_windows(std::size_t total_length, std::size_t window, std::size_t stride) {
  if (window == 0) throw InputError("window length must be positive");
  if (stride == 0) throw InputError("stride must be positive");
  if (window > total_length) {
    throw InputError("window length " + std::to_string(window) + " exceeds series length " +
                     std::to_string(total_length));
  }
  std::vector<Window> out;
  for (std::size_t start = 0, k = 0; start + window <= total_length; start += stride, ++k) {
    out.push_back({k, start});
  }
  return out;
}

Tensor gather_windows(const LabeledSeries& series, std::span<const std::size_t> starts, std::size_t window) {
  if (starts.empty()) throw InputError("gather_windows: no windows requested");
  const std::size_t C = series.channels;
  std::vector<double> data(starts.size() * window * C);
  for (std::size_t b = 0; b < starts.size(); ++b) {
    const std::size_t s = starts[b];
    if (s + window > series.length) throw InputError("gather_windows: window runs past the series end");
    double* dst = data.data() + b * window * C;
    for (std::size_t t = 0; t < window; ++t) {
      for (std::size_t c = 0; c < C; ++c) dst[t * C + c] = series.at(c, s + t);
    }
  }
  return Tensor::from({starts.size(), window, C}, std::move(data));
}

WindowBatches::WindowBatches(const LabeledSeries& series, std::size_t window, std::size_t stride,
                             std::size_t batch_size)
    : series_(&series), window_(window), batch_size_(batch_size),
      windows_(make_windows(series.length, window, stride)) {
  if (batch_size == 0) throw InputError("batch size must be positive");
}

std::size_t WindowBatches::batch_count() const {
  return (windows_.size() + batch_size_ - 1) / batch_size_;
}

std::vector<std::size_t> WindowBatches::batch_starts(std::size_t i) const {
  if (i >= batch_count()) throw InputError("batch index out of range");
  const std::size_t lo = i * batch_size_;
  const std::size_t hi = std::min(lo + batch_size_, windows_.size());
  std::vector<std::size_t> out;
  for (std::size_t k = lo; k < hi; ++k) out.push_back(windows_[k].start);
  return out;
}

Tensor WindowBatches::batch(std::size_t i) const {
  const auto starts = batch_starts(i);
  return gather_windows(*series_, starts, window_);
}

void WindowBatches::shuffle(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws so the order does not depend on the
  // standard library's shuffle implementation.
  for (std::size_t i = windows_.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(windows_[i - 1], windows_[j]);
  }
}

}  // namespace patchad

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string_view>
#include <utility>

#include "iblr/errors.hpp"
#include "iblr/models.hpp"

namespace iblr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Accepts the Unicode minus sign as well as '-'.
std::string normalize_minus(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
        static_cast<unsigned char>(s[i + 1]) == 0x88 && static_cast<unsigned char>(s[i + 2]) == 0x92) {
      out.push_back('-');
      i += 2;
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> content_lines(const std::string& text) {
  std::vector<Line> lines;
  std::istringstream in(text);
  std::string raw;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string norm = normalize_minus(raw);
    const std::string_view t = trim(norm);
    if (t.empty() || t.front() == '#') continue;
    lines.push_back({number, std::string(t)});
  }
  return lines;
}

Dataset parse_csv(const std::string& text, const LoadOptions& opts) {
  std::vector<Line> lines = content_lines(text);
  if (lines.empty()) throw ParseError(0, "no data rows");

  bool header = false;
  if (opts.header) {
    header = *opts.header;
  } else {
    for (std::string_view f : split(lines.front().text, ',')) {
      if (!to_double(f)) header = true;
    }
  }
  const std::size_t first = header ? 1 : 0;
  if (lines.size() <= first) throw ParseError(lines.front().number, "header without data rows");

  const std::size_t cols = split(lines[first].text, ',').size();
  if (cols < 2) throw ShapeError("CSV rows need at least one feature and a label");
  if (header && split(lines.front().text, ',').size() != cols) {
    throw ShapeError("header has " + std::to_string(split(lines.front().text, ',').size()) + " columns, data has " +
                     std::to_string(cols));
  }

  Dataset ds;
  const long n = static_cast<long>(lines.size() - first);
  ds.X.resize(n, static_cast<long>(cols - 1));
  ds.y.resize(n);
  for (long r = 0; r < n; ++r) {
    const Line& line = lines[first + static_cast<std::size_t>(r)];
    const auto fields = split(line.text, ',');
    if (fields.size() != cols) {
      throw ShapeError("line " + std::to_string(line.number) + ": expected " + std::to_string(cols) +
                       " columns, found " + std::to_string(fields.size()));
    }
    long c = 0;
    for (std::size_t f = 0; f < cols; ++f) {
      const auto v = to_double(fields[f]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(line.number, "not a finite number: '" + std::string(trim(fields[f])) + "'");
      }
      const bool is_label = opts.label_first ? f == 0 : f + 1 == cols;
      if (is_label) {
        ds.y(r) = *v;
      } else {
        ds.X(r, c++) = *v;
      }
    }
  }
  return ds;
}

Dataset parse_libsvm(const std::string& text, const LoadOptions& opts) {
  const std::vector<Line> lines = content_lines(text);
  if (lines.empty()) throw ParseError(0, "no data rows");

  std::vector<double> labels;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
  std::size_t max_index = 0;
  for (const Line& line : lines) {
    const auto tokens = split_ws(line.text);
    const auto label = to_double(tokens.front());
    if (!label || !std::isfinite(*label)) throw ParseError(line.number, "bad label");
    labels.push_back(*label);
    rows.emplace_back();
    std::size_t prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const std::size_t colon = tokens[t].find(':');
      if (colon == std::string_view::npos) throw ParseError(line.number, "expected index:value");
      std::size_t idx = 0;
      const std::string_view is = tokens[t].substr(0, colon);
      const auto [ptr, ec] = std::from_chars(is.data(), is.data() + is.size(), idx);
      if (ec != std::errc() || ptr != is.data() + is.size() || idx == 0) {
        throw ParseError(line.number, "bad feature index '" + std::string(is) + "'");
      }
      if (idx <= prev) throw ParseError(line.number, "feature indices must increase");
      prev = idx;
      const auto v = to_double(tokens[t].substr(colon + 1));
      if (!v || !std::isfinite(*v)) throw ParseError(line.number, "bad feature value");
      rows.back().emplace_back(idx, *v);
      max_index = std::max(max_index, idx);
    }
  }
  std::size_t width = max_index;
  if (opts.n_features > 0) {
    if (max_index > opts.n_features) {
      throw ShapeError("feature index " + std::to_string(max_index) + " exceeds declared width " +
                       std::to_string(opts.n_features));
    }
    width = opts.n_features;
  }
  if (width == 0) throw ShapeError("libsvm data has no features");

  Dataset ds;
  ds.X = Mat::Zero(static_cast<long>(rows.size()), static_cast<long>(width));
  ds.y.resize(static_cast<long>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ds.y(static_cast<long>(r)) = labels[r];
    for (const auto& [idx, v] : rows[r]) ds.X(static_cast<long>(r), static_cast<long>(idx - 1)) = v;
  }
  return ds;
}

}  // namespace

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.X.resize(static_cast<long>(idx.size()), X.cols());
  out.y.resize(static_cast<long>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= rows()) throw ShapeError("subset index out of range");
    out.X.row(static_cast<long>(r)) = X.row(static_cast<long>(idx[r]));
    out.y(static_cast<long>(r)) = y(static_cast<long>(idx[r]));
    out.train.push_back(r);
  }
  return out;
}

void split_dataset(Dataset& ds, std::size_t n_train, std::optional<std::uint64_t> shuffle_seed) {
  const std::size_t n = ds.rows();
  if (n_train > n) {
    throw ShapeError("requested " + std::to_string(n_train) + " training rows from " + std::to_string(n));
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  if (shuffle_seed) {
    RngStream rng(*shuffle_seed, 0);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
      std::swap(perm[i - 1], perm[j]);
    }
  }
  const std::size_t cut = n_train == 0 ? n : n_train;
  ds.train.assign(perm.begin(), perm.begin() + static_cast<long>(cut));
  ds.test.assign(perm.begin() + static_cast<long>(cut), perm.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.test.begin(), ds.test.end());
}

void standardize_columns(Dataset& ds) {
  const double n = static_cast<double>(ds.rows());
  if (n == 0.0) return;
  for (long c = 0; c < ds.X.cols(); ++c) {
    const double mean = ds.X.col(c).sum() / n;
    ds.X.col(c).array() -= mean;
    const double sd = std::sqrt(ds.X.col(c).squaredNorm() / n);
    if (sd > 0.0) ds.X.col(c) /= sd;
  }
}

Dataset parse_dataset(const std::string& text, const LoadOptions& opts) {
  Dataset ds = opts.format == DatasetFormat::Csv ? parse_csv(text, opts) : parse_libsvm(text, opts);
  if (opts.standardize) standardize_columns(ds);
  split_dataset(ds, opts.n_train, opts.shuffle_seed);
  return ds;
}

Dataset load_dataset(const std::string& path, const LoadOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), opts);
}

}  // namespace iblr

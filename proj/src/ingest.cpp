#include "psylex/ingest.hpp"

#include "psylex/error.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <iterator>
#include <ostream>
#include <sstream>
#include <unordered_set>

namespace psylex {

namespace {

char32_t lower_codepoint(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c < 0x80) return c;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if ((c >= 0x100 && c <= 0x137) || (c >= 0x14A && c <= 0x177)) return (c % 2 == 0) ? c + 1 : c;
  if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c % 2 == 1) ? c + 1 : c;
  if (c == 0x178) return 0xFF;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c == 0x386) return 0x3AC;
  if (c >= 0x388 && c <= 0x38A) return c + 0x25;
  if (c == 0x38C) return 0x3CC;
  if (c == 0x38E || c == 0x38F) return c + 0x3F;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

void append_utf8(std::string& out, char32_t c) {
  if (c < 0x80) {
    out.push_back(static_cast<char>(c));
  } else if (c < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (c >> 6)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else if (c < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (c >> 12)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (c >> 18)));
    out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
  }
}

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

bool is_missing_token(std::string_view cell) {
  const std::string f = fold_case(cell);
  return f.empty() || f == "na" || f == "nan" || f == "null";
}

}  // namespace

std::string fold_case(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool valid = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; valid && k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) valid = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!valid) {
      out.push_back(s[i]);
      ++i;
      continue;
    }
    append_utf8(out, lower_codepoint(cp));
    i += len;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

TermSet::TermSet(std::vector<std::string> terms, std::string label)
    : terms_(std::move(terms)), label_(std::move(label)) {
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    const std::string key = fold_case(trim(terms_[i]));
    if (key.empty()) throw Error(ErrorCode::InvalidArgument, "empty term at position " + std::to_string(i));
    if (!index_.emplace(key, i).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate term '" + terms_[i] + "'");
  }
}

std::optional<std::size_t> TermSet::find(std::string_view term) const {
  const auto it = index_.find(fold_case(trim(term)));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

bool TermSet::same_terms(const TermSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (fold_case(trim(terms_[i])) != fold_case(trim(other.terms_[i]))) return false;
  }
  return true;
}

TermSetParse parse_term_set(std::string_view text, std::string label) {
  std::vector<std::string> terms;
  std::unordered_set<std::string> seen;
  std::size_t dropped = 0;
  for (std::string_view line : split(text, '\n')) {
    const std::string_view t = trim(line);
    if (t.empty()) continue;
    if (!seen.insert(fold_case(t)).second) {
      ++dropped;
      continue;
    }
    terms.emplace_back(t);
  }
  if (terms.empty()) throw Error(ErrorCode::EmptyTermSet, "no terms in '" + label + "'");
  return {TermSet(std::move(terms), std::move(label)), dropped};
}

TermSetParse parse_term_set(std::istream& in, std::string label) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_term_set(text, std::move(label));
}

void write_term_set(std::ostream& out, const TermSet& terms) {
  for (const auto& t : terms.terms()) out << t << '\n';
}

RatingsMatrix parse_ratings(std::istream& in, char delimiter) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const auto l = strip_cr(line);
    if (trim(l).empty()) continue;
    for (auto cell : split(l, delimiter)) header.emplace_back(trim(cell));
    break;
  }
  if (header.empty()) throw Error(ErrorCode::MissingInput, "ratings table has no header row");
  TermSet terms(std::move(header));
  const auto cols = terms.size();

  std::vector<double> flat;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto l = strip_cr(line);
    if (trim(l).empty()) continue;
    const auto cells = split(l, delimiter);
    if (cells.size() != cols) {
      throw Error(ErrorCode::RaggedRow, "line " + std::to_string(line_no) + " has " +
                                            std::to_string(cells.size()) + " cells, expected " +
                                            std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      const auto cell = trim(cells[j]);
      if (is_missing_token(cell)) {
        throw Error(ErrorCode::MissingValue,
                    "line " + std::to_string(line_no) + ", term '" + terms[j] + "'");
      }
      const auto v = parse_double(cell);
      if (!v) {
        throw Error(ErrorCode::InvalidArgument, "line " + std::to_string(line_no) +
                                                    ": not a number '" + std::string(cell) + "'");
      }
      if (!std::isfinite(*v)) {
        throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line_no) + ", term '" + terms[j] + "'");
      }
      flat.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) throw Error(ErrorCode::MissingInput, "ratings table has no respondent rows");

  RatingsMatrix m;
  m.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * cols + j];
  m.terms = std::move(terms);
  return m;
}

RatingsMatrix ipsatize(const RatingsMatrix& m) {
  if (m.ipsatized) throw Error(ErrorCode::DoubleIpsatize, "ratings are already ipsatized");
  RatingsMatrix out = m;
  const double cols = static_cast<double>(m.values.cols());
  for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < out.values.cols(); ++j) sum += out.values(i, j);
    const double mean = sum / cols;
    out.values.row(i).array() -= mean;
  }
  out.ipsatized = true;
  return out;
}

void validate(const EmbeddingMatrix& e) {
  if (static_cast<std::size_t>(e.values.rows()) != e.terms.size()) {
    throw Error(ErrorCode::CountMismatch, std::to_string(e.values.rows()) + " rows for " +
                                              std::to_string(e.terms.size()) + " terms");
  }
  for (Eigen::Index i = 0; i < e.values.rows(); ++i) {
    if (!e.values.row(i).allFinite()) throw Error(ErrorCode::NonFiniteValue, "term '" + e.terms[i] + "'");
    if (e.values.cols() == 0 || (e.values.row(i).array() == e.values(i, 0)).all()) {
      throw Error(ErrorCode::DegenerateTerm, "constant embedding row for '" + e.terms[i] + "'");
    }
  }
}

std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

EmbeddingMatrix parse_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::BadHeader, "empty stream");
  const auto fields = split(trim(strip_cr(line)), ' ');
  if (fields.size() < 2 || fields[0] != "#psylex-embeddings" || fields[1] != "v1")
    throw Error(ErrorCode::BadHeader, "expected '#psylex-embeddings v1 ...'");

  std::optional<std::size_t> dims;
  std::optional<std::size_t> count;
  Provenance prov;
  for (std::size_t i = 2; i < fields.size(); ++i) {
    if (fields[i].empty()) continue;
    const auto eq = fields[i].find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::BadHeader, "malformed field '" + std::string(fields[i]) + "'");
    const auto key = fields[i].substr(0, eq);
    const auto val = fields[i].substr(eq + 1);
    auto parse_count = [&](std::string_view v) {
      std::size_t n = 0;
      const auto r = std::from_chars(v.data(), v.data() + v.size(), n);
      if (r.ec != std::errc() || r.ptr != v.data() + v.size() || v.empty())
        throw Error(ErrorCode::BadHeader, "bad integer for " + std::string(key));
      return n;
    };
    if (key == "dims") dims = parse_count(val);
    else if (key == "count") count = parse_count(val);
    else if (key == "model") prov.model_id = val;
    else if (key == "query") prov.query_id = val;
    else if (key == "layer") prov.layer = val;
    else throw Error(ErrorCode::BadHeader, "unknown field '" + std::string(key) + "'");
  }
  if (!dims || !count) throw Error(ErrorCode::BadHeader, "header requires dims= and count=");
  if (*dims == 0) throw Error(ErrorCode::BadHeader, "dims must be positive");

  std::vector<std::string> terms;
  terms.reserve(*count);
  EmbeddingMatrix e;
  e.values.resize(static_cast<Eigen::Index>(*count), static_cast<Eigen::Index>(*dims));
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto l = strip_cr(line);
    if (trim(l).empty()) continue;
    if (row >= *count) throw Error(ErrorCode::CountMismatch, "more than count=" + std::to_string(*count) + " rows");
    const auto cells = split(l, '\t');
    if (cells.size() != *dims + 1) {
      throw Error(ErrorCode::DimsMismatch, "row=" + std::to_string(row) + " has " +
                                               std::to_string(cells.size() - 1) + " values, dims=" +
                                               std::to_string(*dims));
    }
    terms.emplace_back(trim(cells[0]));
    for (std::size_t j = 0; j < *dims; ++j) {
      const auto v = parse_double(trim(cells[j + 1]));
      if (!v) throw Error(ErrorCode::InvalidArgument, "row=" + std::to_string(row) + " column " + std::to_string(j) + " is not a number");
      if (!std::isfinite(*v)) throw Error(ErrorCode::NonFiniteValue, "row=" + std::to_string(row) + " column " + std::to_string(j));
      e.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) = *v;
    }
    ++row;
  }
  if (row != *count) {
    throw Error(ErrorCode::CountMismatch, "header count=" + std::to_string(*count) + " but " +
                                              std::to_string(row) + " rows");
  }
  e.terms = TermSet(std::move(terms));
  e.provenance = std::move(prov);
  validate(e);
  return e;
}

void write_embeddings(std::ostream& out, const EmbeddingMatrix& e) {
  out << "#psylex-embeddings v1 dims=" << e.values.cols() << " count=" << e.values.rows();
  out << " model=" << e.provenance.model_id << " query=" << e.provenance.query_id
      << " layer=" << e.provenance.layer << '\n';
  for (Eigen::Index i = 0; i < e.values.rows(); ++i) {
    out << e.terms[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < e.values.cols(); ++j) out << '\t' << format_shortest(e.values(i, j));
    out << '\n';
  }
}

std::vector<std::size_t> AlignmentMap::left_indices() const {
  std::vector<std::size_t> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.first);
  return out;
}

std::vector<std::size_t> AlignmentMap::right_indices() const {
  std::vector<std::size_t> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.second);
  return out;
}

AlignmentMap align_terms(const TermSet& a, const TermSet& b) {
  AlignmentMap map;
  std::vector<std::string> shared;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (const auto j = b.find(a[i])) {
      map.pairs.emplace_back(i, *j);
      shared.push_back(a[i]);
    }
  }
  if (map.pairs.empty()) {
    throw Error(ErrorCode::NoOverlap, "no shared terms between '" + a.label() + "' and '" + b.label() + "'");
  }
  map.terms = TermSet(std::move(shared), a.label() + "&" + b.label());
  return map;
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

TermSet select_terms(const TermSet& t, const std::vector<std::size_t>& idx, std::string label) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(t[i]);
  return TermSet(std::move(out), label.empty() ? t.label() : std::move(label));
}

}  // namespace psylex

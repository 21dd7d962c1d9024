#pragma once

// Input artifacts: descriptor term lists, survey rating tables and
// embedding interchange files, plus term alignment across sources.

#include <Eigen/Dense>

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace psylex {

/// Lowercases ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic letters;
/// everything else passes through unchanged.
std::string fold_case(std::string_view utf8);

/// Trims ASCII whitespace (space, tab, CR, LF, VT, FF) from both ends.
std::string_view trim(std::string_view s);

/// Ordered list of unique descriptor terms. Uniqueness is over the folded,
/// trimmed form; the original spelling is kept for display.
class TermSet {
 public:
  TermSet() = default;
  /// Throws Error(InvalidArgument) on a duplicate (after folding) or empty term.
  explicit TermSet(std::vector<std::string> terms, std::string label = {});

  const std::vector<std::string>& terms() const noexcept { return terms_; }
  const std::string& label() const noexcept { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  std::size_t size() const noexcept { return terms_.size(); }
  bool empty() const noexcept { return terms_.empty(); }
  const std::string& operator[](std::size_t i) const { return terms_[i]; }

  /// Index of the term (matched on folded form), if present.
  std::optional<std::size_t> find(std::string_view term) const;

  /// Same folded terms in the same order.
  bool same_terms(const TermSet& other) const;

 private:
  std::vector<std::string> terms_;
  std::string label_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TermSetParse {
  TermSet terms;
  std::size_t duplicates_dropped = 0;
};

/// One term per non-empty line; duplicates (case-folded) dropped, first kept.
TermSetParse parse_term_set(std::string_view text, std::string label = {});
TermSetParse parse_term_set(std::istream& in, std::string label = {});

void write_term_set(std::ostream& out, const TermSet& terms);

struct RatingsMatrix {
  Eigen::MatrixXd values;  // respondents x terms
  TermSet terms;
  bool ipsatized = false;

  std::size_t n_respondents() const { return static_cast<std::size_t>(values.rows()); }
};

/// Header row holds the terms; every other non-empty line is one respondent.
RatingsMatrix parse_ratings(std::istream& in, char delimiter = ',');

/// Subtracts each respondent's mean rating from their row.
RatingsMatrix ipsatize(const RatingsMatrix& m);

struct Provenance {
  std::string model_id;
  std::string query_id;
  std::string layer;

  bool operator==(const Provenance&) const = default;
};

struct EmbeddingMatrix {
  Eigen::MatrixXd values;  // terms x dims
  TermSet terms;
  Provenance provenance;

  std::size_t dims() const { return static_cast<std::size_t>(values.cols()); }
};

/// Checks the row-count, finiteness and non-constant-row invariants.
void validate(const EmbeddingMatrix& e);

/// Reads interchange format v1:
///   #psylex-embeddings v1 dims=D count=T model=M query=Q layer=L
///   term<TAB>v0<TAB>...<TAB>v(D-1)      (T lines)
EmbeddingMatrix parse_embeddings(std::istream& in);

/// Writes interchange format v1 with shortest round-trip decimals.
void write_embeddings(std::ostream& out, const EmbeddingMatrix& e);

/// Shortest decimal that parses back to exactly `v`.
std::string format_shortest(double v);

/// Parses a full-string decimal; nullopt if malformed.
std::optional<double> parse_double(std::string_view s);

struct AlignmentMap {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (index in a, index in b)
  TermSet terms;                                            // shared terms, a's spelling

  std::vector<std::size_t> left_indices() const;
  std::vector<std::size_t> right_indices() const;
};

/// Case-folded intersection ordered by position in `a`.
AlignmentMap align_terms(const TermSet& a, const TermSet& b);

/// Rows of `m` picked by `rows`, in that order.
Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows);

/// Terms picked by `idx`, in that order.
TermSet select_terms(const TermSet& t, const std::vector<std::size_t>& idx, std::string label = {});

}  // namespace psylex

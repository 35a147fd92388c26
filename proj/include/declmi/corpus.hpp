#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "declmi/count_table.hpp"
#include "declmi/numerics.hpp"

namespace declmi::corpus {

using numerics::Vector;

// Symbol inventory over Unicode scalar values. Index 0 is always the
// reserved UNK symbol; the remaining ids are dense and sorted by code
// point so the same forms always produce the same alphabet.
class Alphabet {
 public:
  static constexpr int kUnkId = 0;

  Alphabet();
  static Alphabet from_graphemes(const std::vector<char32_t>& observed);

  int id_of(char32_t cp) const;            // kUnkId when absent
  bool contains(char32_t cp) const;
  char32_t symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  int size() const { return static_cast<int>(symbols_.size()); }

  const std::vector<char32_t>& symbols() const { return symbols_; }

 private:
  std::vector<char32_t> symbols_;  // [0] = UNK placeholder
  std::unordered_map<char32_t, int> ids_;
};

struct Lexeme {
  std::string form;                  // UTF-8, NFC-composed
  std::vector<char32_t> graphemes;   // decoded form, length >= 1
  Vector vector;                     // meaning vector, finite entries
  int class_id = -1;
  int gender_id = -1;
};

struct Dataset {
  std::vector<Lexeme> lexemes;
  std::vector<std::string> class_names;
  std::vector<std::string> gender_names;
  int dim = 0;
  Alphabet alphabet;

  std::size_t size() const { return lexemes.size(); }
  int n_classes() const { return static_cast<int>(class_names.size()); }
  int n_genders() const { return static_cast<int>(gender_names.size()); }
  void validate() const;  // throws on any broken invariant
};

// Deterministic k-way partition. For cross-validation round r, fold r is
// the test fold, fold (r+1) mod k validation, the rest training.
struct FoldPlan {
  int k = 0;
  std::vector<int> assignment;  // fold id per lexeme
  std::uint64_t seed = 0;
  std::uint64_t signature = 0;  // fingerprint of (assignment, k, seed)

  std::vector<std::size_t> test_indices(int round) const;
  std::vector<std::size_t> validation_indices(int round) const;
  std::vector<std::size_t> train_indices(int round) const;
};

struct LoadOptions {
  bool allow_duplicate_rows = false;  // synthetic corpora repeat (form, class) pairs
};

struct LoadStats {
  std::size_t lexicon_rows = 0;
  std::size_t retained = 0;
  std::size_t dropped_no_embedding = 0;
};

// Lexicon: UTF-8 TSV with header "lemma<TAB>class<TAB>gender".
// Embeddings: optional "<count> <dim>" first line, then
// "token v1 ... vd" space-separated. Only lexemes whose lemma has an
// embedding are retained; drop counts are reported on the JSON-lines log
// channel and through `stats` when given.
Dataset load_lexicon(const std::string& lexicon_path, const std::string& embedding_path,
                     const LoadOptions& options = {}, LoadStats* stats = nullptr);

// Removes classes with fewer than n_min lexemes (boundary inclusive) and
// re-indexes both registries densely, preserving lexeme order.
Dataset filter_min_class_size(const Dataset& d, int n_min);

FoldPlan make_folds(const Dataset& d, int k, std::uint64_t seed, bool stratified = false);

estimation::CountTable build_count_table(const Dataset& d);

// Subset view helper used by training and estimation code.
std::vector<Lexeme> gather(const Dataset& d, const std::vector<std::size_t>& indices);

}  // namespace declmi::corpus

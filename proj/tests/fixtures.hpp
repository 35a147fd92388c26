#pragma once

#include <fstream>
#include <string>
#include <tuple>
#include <vector>

#include "declmi/corpus.hpp"
#include "declmi/utf8.hpp"

namespace fixtures {

using declmi::corpus::Dataset;
using declmi::corpus::Lexeme;
using declmi::numerics::Vector;

struct Row {
  std::string form;
  std::string class_name;
  std::string gender_name;
  Vector vector;
};

inline Dataset make_dataset(const std::vector<Row>& rows) {
  Dataset d;
  d.dim = static_cast<int>(rows.front().vector.size());
  std::vector<char32_t> graphemes;
  for (const Row& r : rows) {
    Lexeme lx;
    lx.graphemes = declmi::utf8::decode_nfc(r.form);
    lx.form = declmi::utf8::encode(lx.graphemes);
    lx.vector = r.vector;
    int cid = -1;
    for (std::size_t i = 0; i < d.class_names.size(); ++i)
      if (d.class_names[i] == r.class_name) cid = static_cast<int>(i);
    if (cid < 0) {
      cid = static_cast<int>(d.class_names.size());
      d.class_names.push_back(r.class_name);
    }
    int gid = -1;
    for (std::size_t i = 0; i < d.gender_names.size(); ++i)
      if (d.gender_names[i] == r.gender_name) gid = static_cast<int>(i);
    if (gid < 0) {
      gid = static_cast<int>(d.gender_names.size());
      d.gender_names.push_back(r.gender_name);
    }
    lx.class_id = cid;
    lx.gender_id = gid;
    graphemes.insert(graphemes.end(), lx.graphemes.begin(), lx.graphemes.end());
    d.lexemes.push_back(std::move(lx));
  }
  d.alphabet = declmi::corpus::Alphabet::from_graphemes(graphemes);
  d.validate();
  return d;
}

// Czech class inventory: published per-class lexeme counts with the single
// gender listed for each class. Sums to 2672 over 13 classes.
inline std::vector<std::tuple<std::string, int, std::string>> czech_classes() {
  return {
      {"masc_inanimate2", 823, "msc"},     {"fem_a", 818, "fem"},
      {"fem_pl_e", 275, "fem"},            {"neut_o", 149, "neut"},
      {"neut_eni", 133, "neut"},           {"masc_animate2_pl_i", 130, "msc"},
      {"masc_animate1_pl_i", 112, "msc"},  {"fem_pl_i", 80, "fem"},
      {"masc_animate1_pl_ove", 55, "msc"}, {"masc_inanimate1", 32, "msc"},
      {"special_masc_pl_ata", 26, "msc"},  {"neut_e", 21, "neut"},
      {"masc_animate1_pl_e", 18, "msc"},
  };
}

// German class sizes (16 classes, 3684 lexemes); only the class marginal
// is published, so no gender assignment here.
inline std::vector<int> german_class_sizes() {
  return {1157, 1105, 264, 256, 184, 154, 151, 70, 67, 51, 51, 49, 41, 35, 25, 24};
}

inline std::string spelled_index(int n) {
  std::string s;
  do {
    s += static_cast<char>('a' + n % 26);
    n /= 26;
  } while (n > 0);
  return s;
}

// A full in-memory dataset realizing the Czech class/gender counts with
// synthetic unique forms and 3-dim vectors.
inline Dataset make_czech_dataset() {
  std::vector<Row> rows;
  int idx = 0;
  for (const auto& [cls, count, gender] : czech_classes()) {
    for (int i = 0; i < count; ++i) {
      Vector v(3);
      v << 0.01 * (idx % 97), 0.02 * (idx % 53), -0.01 * (idx % 31);
      rows.push_back({"w" + spelled_index(idx), cls, gender, v});
      ++idx;
    }
  }
  return make_dataset(rows);
}

// The same content written to lexicon-TSV + embedding-text files.
inline void write_czech_files(const std::string& lexicon_path, const std::string& embedding_path) {
  std::ofstream lex(lexicon_path);
  std::ofstream emb(embedding_path);
  lex << "lemma\tclass\tgender\n";
  int idx = 0;
  int total = 0;
  for (const auto& [cls, count, gender] : czech_classes()) total += count;
  emb << total << " 3\n";
  for (const auto& [cls, count, gender] : czech_classes()) {
    for (int i = 0; i < count; ++i) {
      const std::string form = "w" + spelled_index(idx);
      lex << form << "\t" << cls << "\t" << gender << "\n";
      emb << form << " " << 0.01 * (idx % 97) << " " << 0.02 * (idx % 53) << " "
          << -0.01 * (idx % 31) << "\n";
      ++idx;
    }
  }
}

}  // namespace fixtures

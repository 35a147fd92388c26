#include "declmi/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "declmi/jsonl_log.hpp"
#include "declmi/rng.hpp"
#include "declmi/utf8.hpp"

namespace declmi::log {

namespace {
std::mutex g_mutex;
Sink g_sink;
}  // namespace

void set_sink(Sink sink) {
  std::lock_guard<std::mutex> lock(g_mutex);
  g_sink = std::move(sink);
}

void reset_sink() { set_sink(nullptr); }

void emit(const nlohmann::json& event) {
  std::lock_guard<std::mutex> lock(g_mutex);
  const std::string line = event.dump();
  if (g_sink) {
    g_sink(line);
  } else {
    std::cerr << line << "\n";
  }
}

}  // namespace declmi::log

namespace declmi::corpus {

Alphabet::Alphabet() {
  symbols_.push_back(0xfffd);  // UNK placeholder glyph
}

Alphabet Alphabet::from_graphemes(const std::vector<char32_t>& observed) {
  Alphabet a;
  std::set<char32_t> uniq(observed.begin(), observed.end());
  for (char32_t cp : uniq) {
    a.ids_[cp] = static_cast<int>(a.symbols_.size());
    a.symbols_.push_back(cp);
  }
  return a;
}

int Alphabet::id_of(char32_t cp) const {
  auto it = ids_.find(cp);
  return it == ids_.end() ? kUnkId : it->second;
}

bool Alphabet::contains(char32_t cp) const { return ids_.count(cp) > 0; }

void Dataset::validate() const {
  for (std::size_t i = 0; i < lexemes.size(); ++i) {
    const Lexeme& lx = lexemes[i];
    if (lx.graphemes.empty()) throw std::runtime_error("dataset: empty form at index " + std::to_string(i));
    if (lx.vector.size() != dim) throw std::runtime_error("dataset: vector dimension mismatch at index " + std::to_string(i));
    if (!lx.vector.allFinite()) throw std::runtime_error("dataset: non-finite vector at index " + std::to_string(i));
    if (lx.class_id < 0 || lx.class_id >= n_classes())
      throw std::runtime_error("dataset: class id out of range at index " + std::to_string(i));
    if (lx.gender_id < 0 || lx.gender_id >= n_genders())
      throw std::runtime_error("dataset: gender id out of range at index " + std::to_string(i));
    for (char32_t cp : lx.graphemes) {
      if (!alphabet.contains(cp))
        throw std::runtime_error("dataset: grapheme missing from alphabet at index " + std::to_string(i));
    }
  }
}

std::vector<std::size_t> FoldPlan::test_indices(int round) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == round % k) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::validation_indices(int round) const {
  const int v = (round + 1) % k;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == v) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(int round) const {
  const int t = round % k, v = (round + 1) % k;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != t && assignment[i] != v) out.push_back(i);
  return out;
}

namespace {

struct EmbeddingFile {
  std::unordered_map<std::string, Vector> vectors;
  int dim = 0;
};

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

EmbeddingFile read_embeddings(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open embedding file " + path);
  EmbeddingFile out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto toks = split_ws(line);
    if (first) {
      first = false;
      // Optional "<count> <dim>" header.
      if (toks.size() == 2) {
        try {
          (void)std::stoull(toks[0]);
          out.dim = std::stoi(toks[1]);
          continue;
        } catch (const std::exception&) {
          // fall through: a real two-column data line
        }
      }
    }
    if (toks.size() < 2)
      throw std::runtime_error("embedding file " + path + " line " + std::to_string(line_no) + ": too few columns");
    const int d = static_cast<int>(toks.size()) - 1;
    if (out.dim == 0) out.dim = d;
    if (d != out.dim)
      throw std::runtime_error("embedding file " + path + " line " + std::to_string(line_no) +
                               ": dimension " + std::to_string(d) + " != " + std::to_string(out.dim));
    Vector v(d);
    for (int j = 0; j < d; ++j) {
      try {
        v[j] = std::stod(toks[static_cast<std::size_t>(j) + 1]);
      } catch (const std::exception&) {
        throw std::runtime_error("embedding file " + path + " line " + std::to_string(line_no) + ": bad float");
      }
    }
    if (!v.allFinite())
      throw std::runtime_error("embedding file " + path + " line " + std::to_string(line_no) + ": non-finite entry");
    out.vectors[toks[0]] = std::move(v);
  }
  return out;
}

int intern(std::vector<std::string>& names, std::unordered_map<std::string, int>& ids,
           const std::string& name) {
  auto it = ids.find(name);
  if (it != ids.end()) return it->second;
  const int id = static_cast<int>(names.size());
  ids[name] = id;
  names.push_back(name);
  return id;
}

}  // namespace

Dataset load_lexicon(const std::string& lexicon_path, const std::string& embedding_path,
                     const LoadOptions& options, LoadStats* stats) {
  std::ifstream is(lexicon_path);
  if (!is) throw std::runtime_error("cannot open lexicon file " + lexicon_path);
  const EmbeddingFile emb = read_embeddings(embedding_path);

  Dataset out;
  out.dim = emb.dim;
  std::unordered_map<std::string, int> class_ids, gender_ids;
  std::set<std::pair<std::string, std::string>> seen_rows;
  LoadStats local;

  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  std::vector<char32_t> all_graphemes;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (header) {
      header = false;
      if (cols.size() != 3 || cols[0] != "lemma" || cols[1] != "class" || cols[2] != "gender")
        throw std::runtime_error(lexicon_path + " line 1: expected header lemma<TAB>class<TAB>gender");
      continue;
    }
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty() || cols[2].empty())
      throw std::runtime_error(lexicon_path + " line " + std::to_string(line_no) + ": malformed row");
    ++local.lexicon_rows;

    if (!options.allow_duplicate_rows) {
      if (!seen_rows.insert({cols[0], cols[1]}).second)
        throw std::runtime_error(lexicon_path + " line " + std::to_string(line_no) +
                                 ": duplicate lemma+class row '" + cols[0] + "' / '" + cols[1] + "'");
    }

    auto emb_it = emb.vectors.find(cols[0]);
    if (emb_it == emb.vectors.end()) {
      ++local.dropped_no_embedding;
      continue;
    }

    Lexeme lx;
    lx.graphemes = utf8::decode_nfc(cols[0]);
    if (lx.graphemes.empty())
      throw std::runtime_error(lexicon_path + " line " + std::to_string(line_no) + ": empty lemma");
    lx.form = utf8::encode(lx.graphemes);
    lx.vector = emb_it->second;
    lx.class_id = intern(out.class_names, class_ids, cols[1]);
    lx.gender_id = intern(out.gender_names, gender_ids, cols[2]);
    all_graphemes.insert(all_graphemes.end(), lx.graphemes.begin(), lx.graphemes.end());
    out.lexemes.push_back(std::move(lx));
    ++local.retained;
  }

  if (out.lexemes.empty())
    throw std::runtime_error(lexicon_path + ": no lexemes retained after embedding join");

  out.alphabet = Alphabet::from_graphemes(all_graphemes);
  out.validate();

  log::emit({{"event", "load_lexicon"},
             {"lexicon", lexicon_path},
             {"rows", local.lexicon_rows},
             {"retained", local.retained},
             {"dropped_no_embedding", local.dropped_no_embedding},
             {"classes", out.class_names.size()},
             {"genders", out.gender_names.size()},
             {"dim", out.dim}});
  if (stats) *stats = local;
  return out;
}

Dataset filter_min_class_size(const Dataset& d, int n_min) {
  if (n_min < 1) throw std::invalid_argument("filter_min_class_size: n_min must be >= 1");
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(d.n_classes()), 0);
  for (const auto& lx : d.lexemes) sizes[static_cast<std::size_t>(lx.class_id)] += 1;

  std::vector<int> class_map(sizes.size(), -1);
  Dataset out;
  out.dim = d.dim;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    if (sizes[c] >= n_min) {
      class_map[c] = static_cast<int>(out.class_names.size());
      out.class_names.push_back(d.class_names[c]);
    }
  }
  if (out.class_names.empty())
    throw std::runtime_error("filter_min_class_size: all classes removed at n_min=" + std::to_string(n_min));

  std::vector<int> gender_map(static_cast<std::size_t>(d.n_genders()), -1);
  std::vector<char32_t> all_graphemes;
  for (const auto& lx : d.lexemes) {
    const int mapped = class_map[static_cast<std::size_t>(lx.class_id)];
    if (mapped < 0) continue;
    Lexeme copy = lx;
    copy.class_id = mapped;
    int& g = gender_map[static_cast<std::size_t>(lx.gender_id)];
    if (g < 0) {
      g = static_cast<int>(out.gender_names.size());
      out.gender_names.push_back(d.gender_names[static_cast<std::size_t>(lx.gender_id)]);
    }
    copy.gender_id = g;
    all_graphemes.insert(all_graphemes.end(), copy.graphemes.begin(), copy.graphemes.end());
    out.lexemes.push_back(std::move(copy));
  }
  out.alphabet = Alphabet::from_graphemes(all_graphemes);
  out.validate();

  log::emit({{"event", "filter_min_class_size"},
             {"n_min", n_min},
             {"classes_before", d.n_classes()},
             {"classes_after", out.n_classes()},
             {"lexemes_before", d.size()},
             {"lexemes_after", out.size()}});
  return out;
}

FoldPlan make_folds(const Dataset& d, int k, std::uint64_t seed, bool stratified) {
  if (k < 3) throw std::invalid_argument("make_folds: need k >= 3 (test, validation, train)");
  if (static_cast<std::size_t>(k) > d.size())
    throw std::invalid_argument("make_folds: k exceeds dataset size");

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(d.size(), -1);
  Rng rng(derive_seed(seed, 0x666f6c64 /* "fold" */));

  if (!stratified) {
    std::vector<std::size_t> order(d.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); ++pos)
      plan.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  } else {
    // Per-class shuffles feeding one global round-robin counter keeps the
    // overall fold sizes within 1 of each other.
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(d.n_classes()));
    for (std::size_t i = 0; i < d.size(); ++i)
      by_class[static_cast<std::size_t>(d.lexemes[i].class_id)].push_back(i);
    std::size_t counter = 0;
    for (auto& members : by_class) {
      rng.shuffle(members);
      for (std::size_t idx : members)
        plan.assignment[idx] = static_cast<int>(counter++ % static_cast<std::size_t>(k));
    }
  }

  std::uint64_t sig = derive_seed(seed, static_cast<std::uint64_t>(k));
  for (int a : plan.assignment) sig = mix_seed(sig ^ static_cast<std::uint64_t>(a + 1));
  plan.signature = sig;
  return plan;
}

estimation::CountTable build_count_table(const Dataset& d) {
  if (d.lexemes.empty()) throw std::invalid_argument("build_count_table: empty dataset");
  estimation::CountTable t(static_cast<std::size_t>(d.n_classes()),
                           static_cast<std::size_t>(d.n_genders()));
  for (const auto& lx : d.lexemes)
    t.add(static_cast<std::size_t>(lx.class_id), static_cast<std::size_t>(lx.gender_id));
  return t;
}

std::vector<Lexeme> gather(const Dataset& d, const std::vector<std::size_t>& indices) {
  std::vector<Lexeme> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(d.lexemes.at(i));
  return out;
}

}  // namespace declmi::corpus

#pragma once

#include <cstdint>
#include <vector>

namespace declmi::estimation {

// Joint counts N(class, gender) with cached totals.
class CountTable {
 public:
  CountTable(std::size_t n_classes, std::size_t n_genders)
      : counts_(n_classes, std::vector<std::int64_t>(n_genders, 0)) {}

  void add(std::size_t c, std::size_t g, std::int64_t n = 1) {
    counts_.at(c).at(g) += n;
    total_ += n;
  }

  std::int64_t count(std::size_t c, std::size_t g) const { return counts_.at(c).at(g); }
  std::int64_t class_total(std::size_t c) const {
    std::int64_t n = 0;
    for (auto v : counts_.at(c)) n += v;
    return n;
  }
  std::int64_t gender_total(std::size_t g) const {
    std::int64_t n = 0;
    for (const auto& row : counts_) n += row.at(g);
    return n;
  }
  std::int64_t total() const { return total_; }
  std::size_t n_classes() const { return counts_.size(); }
  std::size_t n_genders() const { return counts_.empty() ? 0 : counts_[0].size(); }

  // Empirical p(c | g); requires the gender to be observed.
  double class_given_gender(std::size_t c, std::size_t g) const;

 private:
  std::vector<std::vector<std::int64_t>> counts_;
  std::int64_t total_ = 0;
};

}  // namespace declmi::estimation

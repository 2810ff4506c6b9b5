#pragma once

// Brute-force reference implementations of the four metrics, written from
// the formulas with plain nested loops and no library code, plus a generator
// of small randomized corpora to compare them against.

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "phigrade/metrics.hpp"

namespace phigrade::testing::oracle {

struct Item {
  std::string entity;
  std::string category;
  int level;
};

struct Record {
  std::string id;
  std::vector<Item> gold;
  std::vector<Item> pred;
  int incompatible = 0;
};

// Trim ASCII spaces and lower-case ASCII letters. The generator only varies
// entities in ways this covers.
inline std::string norm(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && s[b] == ' ') ++b;
  while (e > b && s[e - 1] == ' ') --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out += c;
  }
  return out;
}

inline bool same_key(const Item& a, const Item& b) {
  return norm(a.entity) == norm(b.entity) && a.category == b.category;
}

inline std::optional<double> mcif(const std::vector<Record>& corpus) {
  double sum = 0;
  int n = 0;
  for (const auto& r : corpus) {
    if (r.gold.empty()) continue;
    sum += double(r.pred.size() + r.incompatible) / double(r.gold.size());
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

inline std::optional<double> mccr(const std::vector<Record>& corpus) {
  double sum = 0;
  int n = 0;
  for (const auto& r : corpus) {
    const int all = int(r.pred.size()) + r.incompatible;
    if (all == 0) continue;
    sum += double(r.pred.size()) / double(all);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

// Pairs of matched levels for one record: each gold item in order takes the
// first unused prediction with the same key.
inline std::vector<std::pair<int, int>> matched_levels(const Record& r) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> used(r.pred.size(), false);
  for (const auto& g : r.gold) {
    for (std::size_t j = 0; j < r.pred.size(); ++j) {
      if (!used[j] && same_key(g, r.pred[j])) {
        used[j] = true;
        pairs.emplace_back(g.level, r.pred[j].level);
        break;
      }
    }
  }
  return pairs;
}

inline std::optional<double> msgr(const std::vector<Record>& corpus) {
  int correct = 0, total = 0;
  for (const auto& r : corpus) {
    for (const auto& [g, p] : matched_levels(r)) {
      if (g >= 3 || p >= 3) {
        ++total;
        if (g == p) ++correct;
      }
    }
  }
  if (total == 0) return std::nullopt;
  return double(correct) / double(total);
}

inline std::optional<double> micro_f1(const std::vector<Record>& corpus) {
  int tp[6] = {0}, fp[6] = {0}, fn[6] = {0};
  int n = 0;
  for (const auto& r : corpus) {
    if (r.gold.empty()) continue;
    ++n;
    int g = 0;
    for (const auto& it : r.gold) g = it.level > g ? it.level : g;
    int p = 0;
    for (const auto& it : r.pred) p = it.level > p ? it.level : p;
    for (int l = 1; l <= 5; ++l) {
      if (p == l && g == l) ++tp[l];
      if (p == l && g != l) ++fp[l];
      if (g == l && p != l) ++fn[l];
    }
  }
  if (n == 0) return std::nullopt;
  int TP = 0, FP = 0, FN = 0;
  for (int l = 1; l <= 5; ++l) {
    TP += tp[l];
    FP += fp[l];
    FN += fn[l];
  }
  const double P = TP + FP == 0 ? 0.0 : double(TP) / (TP + FP);
  const double R = TP + FN == 0 ? 0.0 : double(TP) / (TP + FN);
  return P + R == 0 ? 0.0 : 2 * P * R / (P + R);
}

// Random corpus of up to 5 records with up to 6 gold triples each; the
// predictions are gold with random drops, level and category flips, entity
// case/space variants, extra items and incompatible items.
inline std::vector<Record> random_corpus(std::mt19937_64& rng) {
  static const std::vector<std::string> kEntities = {"张三", "李四", "HPV16阳性", "高血压",
                                                     "Aspirin", "hiv抗体阳性", "杭州", "42岁"};
  static const std::vector<std::string> kCategories = {"patient name", "disease", "age",
                                                       "sensitive test result", "address-city"};
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::vector<Record> corpus;
  const std::size_t records = 1 + pick(5);
  for (std::size_t r = 0; r < records; ++r) {
    Record rec;
    rec.id = "m" + std::to_string(r);
    const std::size_t n = pick(7);
    while (rec.gold.size() < n) {
      Item it{kEntities[pick(kEntities.size())], kCategories[pick(kCategories.size())],
              1 + int(pick(5))};
      bool dup = false;
      for (const auto& g : rec.gold) {
        dup = dup || (g.entity == it.entity && g.category == it.category && g.level == it.level);
      }
      if (!dup) rec.gold.push_back(it);
    }
    for (const auto& g : rec.gold) {
      const auto roll = pick(10);
      if (roll == 0) continue;  // dropped
      Item p = g;
      if (roll == 1) p.level = 1 + int(pick(5));
      if (roll == 2) p.category = kCategories[pick(kCategories.size())];
      if (roll == 3 && !p.entity.empty() && p.entity[0] >= 'a' && p.entity[0] <= 'z') {
        p.entity[0] = static_cast<char>(p.entity[0] - 'a' + 'A');
      }
      if (roll == 4) p.entity = " " + p.entity + " ";
      rec.pred.push_back(p);
      if (roll == 5) rec.pred.push_back(Item{g.entity, g.category, 1 + int(pick(5))});
    }
    const auto extras = pick(3);
    for (std::size_t i = 0; i < extras; ++i) {
      rec.pred.push_back(Item{kEntities[pick(kEntities.size())], kCategories[pick(kCategories.size())],
                              1 + int(pick(5))});
    }
    rec.incompatible = int(pick(4) == 0 ? 1 + pick(2) : 0);
    std::shuffle(rec.pred.begin(), rec.pred.end(), rng);
    corpus.push_back(std::move(rec));
  }
  return corpus;
}

inline AlignedCorpus to_aligned(const std::vector<Record>& corpus) {
  AlignedCorpus out;
  for (const auto& r : corpus) {
    GoldRecord g{r.id, {}};
    for (const auto& it : r.gold) g.triples.push_back(Triple{it.entity, it.category, SensitivityLevel(it.level)});
    PredictedRecord p{r.id, {}, static_cast<std::size_t>(r.incompatible)};
    for (const auto& it : r.pred) p.triples.push_back(Triple{it.entity, it.category, SensitivityLevel(it.level)});
    out.gold.push_back(std::move(g));
    out.predicted.push_back(std::move(p));
  }
  return out;
}

// Library value, or nullopt when the library reports the metric undefined.
template <typename Fn>
std::optional<double> guarded(Fn fn) {
  try {
    return fn();
  } catch (const MetricError&) {
    return std::nullopt;
  }
}

inline bool agree(const std::optional<double>& a, const std::optional<double>& b, double tol = 1e-12) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::fabs(*a - *b) <= tol;
}

struct Comparison {
  int corpora = 0;
  int mismatches = 0;
  std::string first_mismatch;
};

// Compares library and oracle on `count` random corpora.
inline Comparison compare_random(std::uint64_t seed, int count) {
  std::mt19937_64 rng(seed);
  Comparison cmp;
  for (int c = 0; c < count; ++c) {
    const auto corpus = random_corpus(rng);
    const auto aligned = to_aligned(corpus);
    const std::pair<std::optional<double>, std::optional<double>> results[] = {
        {guarded([&] { return phigrade::mcif(aligned); }), mcif(corpus)},
        {guarded([&] { return phigrade::mccr(aligned); }), mccr(corpus)},
        {guarded([&] { return phigrade::msgr(aligned); }), msgr(corpus)},
        {guarded([&] { return phigrade::micro_f1_max_level(aligned); }), micro_f1(corpus)},
    };
    static const char* kNames[] = {"MCIF", "MCCR", "MSGR", "micro-F1"};
    ++cmp.corpora;
    for (int m = 0; m < 4; ++m) {
      if (!agree(results[m].first, results[m].second)) {
        ++cmp.mismatches;
        if (cmp.first_mismatch.empty()) {
          cmp.first_mismatch = std::string(kNames[m]) + " on corpus " + std::to_string(c);
        }
      }
    }
  }
  return cmp;
}

}  // namespace phigrade::testing::oracle

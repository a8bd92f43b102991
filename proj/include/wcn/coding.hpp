#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace wcn {

// Superposition-coding layer rates.  Layer l' is decoded treating all
// higher layers as noise, so
//   R^l = sum_{l'<=l} log(1 + P(l')*g(l') / (1 + g(l') * sum_{l''>l'} P(l''))).
// log_base 0 selects the natural logarithm.
inline std::vector<double> layer_rates(const std::vector<double>& powers,
                                       const std::vector<double>& thresholds,
                                       double log_base = 0.0) {
  if (powers.size() != thresholds.size())
    throw std::invalid_argument("layer_rates: powers/thresholds size mismatch");
  const std::size_t L = powers.size();
  const double denom = log_base > 0.0 ? std::log(log_base) : 1.0;
  std::vector<double> rates(L + 1, 0.0);
  double acc = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    double tail = 0.0;
    for (std::size_t t = l + 1; t < L; ++t) tail += powers[t];
    const double g = thresholds[l];
    acc += std::log1p(powers[l] * g / (1.0 + g * tail)) / denom;
    rates[l + 1] = acc;
  }
  return rates;
}

// table[k][l]: rate of resource level k when the receiver sits in state l.
inline double realized_rate(int state, int k,
                            const std::vector<std::vector<double>>& table) {
  return table[static_cast<std::size_t>(k)][static_cast<std::size_t>(state)];
}

// Outage baseline: a single code layer at threshold index l_star; receivers
// at or above the threshold state decode the full outage rate, others nothing.
inline double outage_rate(int state, int l_star,
                          const std::vector<std::vector<double>>& table,
                          int k) {
  if (k <= 0 || state < l_star) return 0.0;
  return table[static_cast<std::size_t>(k)][static_cast<std::size_t>(l_star)];
}

// Receivers of one transmitter ordered by realized rate (worst first), with
// the nested decode sets expressed through that order: partition n (1-based)
// carries incremental rate width[n-1] and is decodable exactly by the
// receivers at positions >= n-1 in `order`.
struct PartitionStructure {
  std::vector<int> order;     // receiver payloads sorted by (rate, id) ascending
  std::vector<double> rate;   // realized rate per ordered receiver
  std::vector<double> width;  // ΔR_n = rate[n] - rate[n-1], rate[-1] = 0

  double best_rate() const { return rate.empty() ? 0.0 : rate.back(); }
  std::size_t size() const { return order.size(); }
};

// `receivers` carries (payload id, realized rate).  Ties in rate are broken
// by ascending id; that only permutes zero-width partitions.
inline PartitionStructure build_partitions(
    std::vector<std::pair<int, double>> receivers) {
  std::sort(receivers.begin(), receivers.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second < b.second;
              return a.first < b.first;
            });
  PartitionStructure p;
  p.order.reserve(receivers.size());
  p.rate.reserve(receivers.size());
  p.width.reserve(receivers.size());
  double prev = 0.0;
  for (const auto& [id, r] : receivers) {
    p.order.push_back(id);
    p.rate.push_back(r);
    p.width.push_back(r - prev);
    prev = r;
  }
  return p;
}

}  // namespace wcn

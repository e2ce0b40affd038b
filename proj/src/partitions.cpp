// Apache License, Version 2.0, refer to LICENSE.txt

#include "mssp/partitions.hpp"

#include <algorithm>
#include <numeric>

namespace mssp {

void validate(const SetPartition& p) {
  if (p.labels.empty()) {
    if (!p.block_sizes.empty())
      throw std::invalid_argument("SetPartition: empty labels with non-empty blocks");
    return;
  }
  int running_max = 0;
  std::vector<int> counts(p.block_sizes.size(), 0);
  for (int a : p.labels) {
    if (a < 1 || a > running_max + 1)
      throw std::invalid_argument("SetPartition: labels must satisfy restricted growth");
    running_max = std::max(running_max, a);
    if (a > static_cast<int>(counts.size()))
      throw std::invalid_argument("SetPartition: label exceeds block count");
    ++counts[a - 1];
  }
  if (running_max != static_cast<int>(p.block_sizes.size()))
    throw std::invalid_argument("SetPartition: block count does not match max label");
  if (counts != p.block_sizes)
    throw std::invalid_argument("SetPartition: block sizes do not match labels");
}

PartitionEnumerator::PartitionEnumerator(int n) : n_(n) {
  if (n < 1 || n > 12)
    throw std::invalid_argument("PartitionEnumerator: n must be in [1, 12]");
  labels_.assign(n, 1);
  prefix_max_.assign(n, 1);
}

bool PartitionEnumerator::next(SetPartition& out) {
  if (done_) return false;
  if (!first_) {
    // Advance to the next restricted-growth string.
    int i = n_ - 1;
    for (; i >= 1; --i) {
      if (labels_[i] <= prefix_max_[i - 1]) break;
    }
    if (i < 1) {
      done_ = true;
      return false;
    }
    ++labels_[i];
    prefix_max_[i] = std::max(prefix_max_[i - 1], labels_[i]);
    for (int j = i + 1; j < n_; ++j) {
      labels_[j] = 1;
      prefix_max_[j] = prefix_max_[i];
    }
  }
  first_ = false;
  out.labels = labels_;
  out.block_sizes.assign(prefix_max_[n_ - 1], 0);
  for (int a : labels_) ++out.block_sizes[a - 1];
  return true;
}

int GroupedSample::total() const {
  return std::accumulate(sizes.begin(), sizes.end(), 0);
}

int GroupedSample::species_total(int d) const {
  int t = 0;
  for (int j = 0; j < groups; ++j) t += freq[j][d - 1];
  return t;
}

std::vector<int> GroupedSample::groups_of_species(int d) const {
  std::vector<int> out;
  for (int j = 0; j < groups; ++j)
    if (freq[j][d - 1] > 0) out.push_back(j);
  return out;
}

void validate(const GroupedSample& g) {
  if (g.groups < 1)
    throw std::invalid_argument("GroupedSample: need at least one group");
  if (static_cast<int>(g.sizes.size()) != g.groups ||
      static_cast<int>(g.labels.size()) != g.groups ||
      static_cast<int>(g.freq.size()) != g.groups)
    throw std::invalid_argument("GroupedSample: per-group fields must have length J");
  std::vector<int> totals(g.distinct, 0);
  for (int j = 0; j < g.groups; ++j) {
    if (g.sizes[j] < 0 || static_cast<int>(g.labels[j].size()) != g.sizes[j])
      throw std::invalid_argument("GroupedSample: sizes do not match labels");
    if (static_cast<int>(g.freq[j].size()) != g.distinct)
      throw std::invalid_argument("GroupedSample: freq rows must have length D");
    std::vector<int> counts(g.distinct, 0);
    for (int d : g.labels[j]) {
      if (d < 1 || d > g.distinct)
        throw std::invalid_argument("GroupedSample: species index out of range");
      ++counts[d - 1];
    }
    for (int d = 0; d < g.distinct; ++d) {
      if (counts[d] != g.freq[j][d])
        throw std::invalid_argument("GroupedSample: freq does not match labels");
      if (g.freq[j][d] < 0)
        throw std::invalid_argument("GroupedSample: negative frequency");
      totals[d] += g.freq[j][d];
    }
  }
  for (int d = 0; d < g.distinct; ++d)
    if (totals[d] == 0)
      throw std::invalid_argument("GroupedSample: species with no observations");
}

GroupedSample grouped_from_partition(const SetPartition& p) {
  validate(p);
  GroupedSample g;
  g.groups = 1;
  g.sizes = {p.n()};
  g.labels = {p.labels};
  g.distinct = p.blocks();
  g.freq = {p.block_sizes};
  return g;
}

}  // namespace mssp

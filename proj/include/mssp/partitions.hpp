// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace mssp {

// Set partition of [n] in order-of-arrival form: labels[i] is the 1-based
// block of item i, labels[0] == 1 and each label is at most one more than the
// running maximum (restricted growth).
struct SetPartition {
  std::vector<int> labels;
  std::vector<int> block_sizes;

  int n() const { return static_cast<int>(labels.size()); }
  int blocks() const { return static_cast<int>(block_sizes.size()); }
};

// Throws std::invalid_argument if the restricted-growth and block-size
// invariants do not hold.
void validate(const SetPartition& p);

// Partition induced by ties among raw tags, relabeled by order of first
// appearance.  Tags only need operator<.
template <typename T>
SetPartition canonicalize(std::span<const T> raw) {
  SetPartition p;
  p.labels.reserve(raw.size());
  std::map<T, int> seen;
  for (const T& tag : raw) {
    auto [it, inserted] = seen.emplace(tag, static_cast<int>(seen.size()) + 1);
    p.labels.push_back(it->second);
    if (inserted)
      p.block_sizes.push_back(1);
    else
      ++p.block_sizes[it->second - 1];
  }
  return p;
}

template <typename T>
SetPartition canonicalize(const std::vector<T>& raw) {
  return canonicalize(std::span<const T>(raw));
}

// Streams every set partition of [n] in lexicographic restricted-growth
// order.  Enumeration is capped at n = 12 (Bell(12) = 4213597).
class PartitionEnumerator {
 public:
  explicit PartitionEnumerator(int n);
  // Fills `out` with the next partition; returns false when exhausted.
  bool next(SetPartition& out);

 private:
  int n_;
  bool first_ = true;
  bool done_ = false;
  std::vector<int> labels_;
  std::vector<int> prefix_max_;
};

template <typename Fn>
void for_each_partition(int n, Fn&& fn) {
  PartitionEnumerator e(n);
  SetPartition p;
  while (e.next(p)) fn(p);
}

// Observations from J groups with species identified across groups.
// labels[j][i] is the 1-based global species of observation i in group j;
// freq[j][d-1] counts observations of species d in group j.  When built by
// grouped_from_observations, species are numbered by first appearance in the
// group-major scan.
struct GroupedSample {
  int groups = 0;
  std::vector<int> sizes;
  std::vector<std::vector<int>> labels;
  int distinct = 0;
  std::vector<std::vector<int>> freq;

  int total() const;
  // Total observations of species d over all groups.
  int species_total(int d) const;
  // Groups in which species d appears.
  std::vector<int> groups_of_species(int d) const;
};

void validate(const GroupedSample& g);

// Builds a GroupedSample from raw per-group tag sequences; a tag appearing in
// several groups is the same species everywhere.
template <typename T>
GroupedSample grouped_from_observations(const std::vector<std::vector<T>>& obs) {
  if (obs.empty())
    throw std::invalid_argument("grouped_from_observations: need at least one group");
  GroupedSample g;
  g.groups = static_cast<int>(obs.size());
  g.sizes.resize(g.groups);
  g.labels.resize(g.groups);
  std::map<T, int> seen;
  for (int j = 0; j < g.groups; ++j) {
    g.sizes[j] = static_cast<int>(obs[j].size());
    g.labels[j].reserve(obs[j].size());
    for (const T& tag : obs[j]) {
      auto [it, inserted] = seen.emplace(tag, static_cast<int>(seen.size()) + 1);
      g.labels[j].push_back(it->second);
    }
  }
  g.distinct = static_cast<int>(seen.size());
  g.freq.assign(g.groups, std::vector<int>(g.distinct, 0));
  for (int j = 0; j < g.groups; ++j)
    for (int d : g.labels[j]) ++g.freq[j][d - 1];
  return g;
}

// Single-group view of a set partition as a GroupedSample (J = 1).
GroupedSample grouped_from_partition(const SetPartition& p);

}  // namespace mssp

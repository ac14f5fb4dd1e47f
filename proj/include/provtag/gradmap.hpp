#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace provtag {

inline constexpr double kDefaultPruneEps = 1e-5;

/// Sparse map from parameter key (interned feature or edge id) to a partial
/// derivative of one tag scalar. Kept as a sorted flat vector: nodes hold a
/// handful of entries, so linear merges beat tree or hash storage.
class GradMap {
  public:
    using Entry = std::pair<uint32_t, double>;

    bool empty() const { return entries_.empty(); }
    size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }
    const std::vector<Entry>& entries() const { return entries_; }

    double get(uint32_t key) const {
        for (const Entry& e : entries_)
            if (e.first == key) return e.second;
        return 0.0;
    }

    void set(uint32_t key, double value, double prune_eps) {
        auto it = lower_bound(key);
        if (it != entries_.end() && it->first == key) {
            if (std::fabs(value) < prune_eps)
                entries_.erase(it);
            else
                it->second = value;
        } else if (std::fabs(value) >= prune_eps) {
            entries_.insert(it, {key, value});
        }
    }

    void add(uint32_t key, double delta, double prune_eps) { set(key, get(key) + delta, prune_eps); }

    /// this ← a·src + b·this, pruning entries below prune_eps.
    void blend(double a, const GradMap& src, double b, double prune_eps) {
        if (&src == this) {
            scale(a + b, prune_eps);
            return;
        }
        std::vector<Entry> out;
        out.reserve(entries_.size() + src.entries_.size());
        auto si = src.entries_.begin(), se = src.entries_.end();
        auto di = entries_.begin(), de = entries_.end();
        auto push = [&](uint32_t k, double v) {
            if (std::fabs(v) >= prune_eps) out.push_back({k, v});
        };
        while (si != se || di != de) {
            if (di == de || (si != se && si->first < di->first)) {
                push(si->first, a * si->second);
                ++si;
            } else if (si == se || di->first < si->first) {
                push(di->first, b * di->second);
                ++di;
            } else {
                push(di->first, a * si->second + b * di->second);
                ++si;
                ++di;
            }
        }
        entries_ = std::move(out);
    }

    void scale(double factor, double prune_eps) {
        if (factor == 1.0) return;
        std::vector<Entry> out;
        out.reserve(entries_.size());
        for (const Entry& e : entries_) {
            double v = factor * e.second;
            if (std::fabs(v) >= prune_eps) out.push_back({e.first, v});
        }
        entries_ = std::move(out);
    }

    void assign_scaled(const GradMap& src, double factor, double prune_eps) {
        entries_.clear();
        entries_.reserve(src.entries_.size());
        for (const Entry& e : src.entries_) {
            double v = factor * e.second;
            if (std::fabs(v) >= prune_eps) entries_.push_back({e.first, v});
        }
    }

  private:
    std::vector<Entry>::iterator lower_bound(uint32_t key) {
        size_t lo = 0, hi = entries_.size();
        while (lo < hi) {
            size_t mid = (lo + hi) / 2;
            if (entries_[mid].first < key)
                lo = mid + 1;
            else
                hi = mid;
        }
        return entries_.begin() + static_cast<ptrdiff_t>(lo);
    }

    std::vector<Entry> entries_;
};

}  // namespace provtag

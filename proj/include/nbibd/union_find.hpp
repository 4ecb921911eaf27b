#pragma once

#include <numeric>
#include <utility>
#include <vector>

namespace nbibd {

// Disjoint sets with union by size and path halving.
class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }

    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    // Returns true when x and y were in different sets.
    bool unite(int x, int y) {
        x = find(x);
        y = find(y);
        if (x == y) return false;
        if (size_[x] < size_[y]) std::swap(x, y);
        parent_[y] = x;
        size_[x] += size_[y];
        return true;
    }

private:
    std::vector<int> parent_;
    std::vector<int> size_;
};

}  // namespace nbibd

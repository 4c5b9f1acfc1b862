#pragma once

#include <span>
#include <string>
#include <vector>

#include "tnf/nn/matrix.hpp"

namespace tnf::nn {

struct ParamEntry {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const { return rows * cols; }
    friend bool operator==(const ParamEntry&, const ParamEntry&) = default;
};

/// Named parameter blocks packed into one flat buffer. Gradients and
/// optimizer moments use stores of identical layout.
class ParamStore {
public:
    std::size_t add(std::string name, std::size_t rows, std::size_t cols);

    const std::vector<ParamEntry>& entries() const { return entries_; }
    const ParamEntry& entry(std::size_t idx) const { return entries_.at(idx); }
    /// Index of a named block; throws std::out_of_range if absent.
    std::size_t find(const std::string& name) const;

    View view(std::size_t idx) { return {data_.data() + entries_[idx].offset, entries_[idx].rows, entries_[idx].cols}; }
    ConstView view(std::size_t idx) const {
        return {data_.data() + entries_[idx].offset, entries_[idx].rows, entries_[idx].cols};
    }
    std::span<double> values(std::size_t idx) { return {data_.data() + entries_[idx].offset, entries_[idx].size()}; }
    std::span<const double> values(std::size_t idx) const {
        return {data_.data() + entries_[idx].offset, entries_[idx].size()};
    }

    std::span<double> flat() { return data_; }
    std::span<const double> flat() const { return data_; }
    std::size_t total() const { return data_.size(); }

    /// Same layout, all zeros.
    ParamStore zeros_like() const;
    void zero();
    bool same_layout(const ParamStore& other) const { return entries_ == other.entries_; }
    /// this += other (identical layout required).
    void accumulate(const ParamStore& other);

    friend bool operator==(const ParamStore&, const ParamStore&) = default;

private:
    std::vector<ParamEntry> entries_;
    std::vector<double> data_;
};

}  // namespace tnf::nn

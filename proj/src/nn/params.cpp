#include "tnf/nn/params.hpp"

#include <algorithm>
#include <stdexcept>

namespace tnf::nn {

std::size_t ParamStore::add(std::string name, std::size_t rows, std::size_t cols) {
    for (const auto& e : entries_) {
        if (e.name == name) throw std::logic_error("duplicate parameter name " + name);
    }
    entries_.push_back(ParamEntry{std::move(name), rows, cols, data_.size()});
    data_.resize(data_.size() + rows * cols, 0.0);
    return entries_.size() - 1;
}

std::size_t ParamStore::find(const std::string& name) const {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].name == name) return i;
    }
    throw std::out_of_range("no parameter named " + name);
}

ParamStore ParamStore::zeros_like() const {
    ParamStore z;
    z.entries_ = entries_;
    z.data_.assign(data_.size(), 0.0);
    return z;
}

void ParamStore::zero() { std::fill(data_.begin(), data_.end(), 0.0); }

void ParamStore::accumulate(const ParamStore& other) {
    if (!same_layout(other)) throw std::logic_error("ParamStore::accumulate: layout mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

}  // namespace tnf::nn

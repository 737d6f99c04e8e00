#include "deqmpi/tensor.hpp"

namespace deqmpi {

void ParamStore::add(const std::string& name, Tensor weight) {
    if (has(name)) throw shape_error("ParamStore: duplicate parameter '" + name + "'");
    Entry e;
    e.name = name;
    e.grad = Tensor(weight.n, weight.c, weight.h, weight.w);
    e.weight = std::move(weight);
    index_[name] = items_.size();
    items_.push_back(std::move(e));
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw shape_error("ParamStore: unknown parameter '" + name + "'");
    return items_[it->second];
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw shape_error("ParamStore: unknown parameter '" + name + "'");
    return items_[it->second];
}

void ParamStore::zero_grads() {
    for (auto& e : items_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

void ParamStore::accumulate_grads(const ParamStore& other, double scale) {
    for (const auto& oe : other.items_) {
        Entry& e = entry(oe.name);
        if (!e.grad.same_shape(oe.grad))
            throw shape_error("ParamStore: gradient shape mismatch for '" + oe.name + "'");
        for (std::size_t i = 0; i < e.grad.data.size(); ++i)
            e.grad.data[i] += scale * oe.grad.data[i];
    }
}

void ParamStore::merge(const ParamStore& other) {
    for (const auto& oe : other.items_) add(oe.name, oe.weight);
}

void ParamStore::save(TensorContainer& out, const std::string& prefix) const {
    for (const auto& e : items_) {
        out.add(prefix + e.name,
                {static_cast<std::uint32_t>(e.weight.n), static_cast<std::uint32_t>(e.weight.c),
                 static_cast<std::uint32_t>(e.weight.h), static_cast<std::uint32_t>(e.weight.w)},
                e.weight.data);
    }
}

ParamStore ParamStore::load(const TensorContainer& in, const std::string& prefix) {
    ParamStore ps;
    for (const auto& e : in.entries()) {
        if (e.name.rfind(prefix, 0) != 0) continue;
        if (e.dims.size() != 4 || e.dtype != Dtype::f64)
            throw io_error("ParamStore: entry '" + e.name + "' is not a 4-D f64 tensor");
        Tensor t(e.dims[0], e.dims[1], e.dims[2], e.dims[3]);
        t.data = e.f64;
        ps.add(e.name.substr(prefix.size()), std::move(t));
    }
    return ps;
}

} // namespace deqmpi

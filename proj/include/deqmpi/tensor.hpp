#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "deqmpi/container.hpp"
#include "deqmpi/errors.hpp"
#include "deqmpi/image.hpp"

namespace deqmpi {

/// Dense NCHW tensor.
struct Tensor {
    std::size_t n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
        : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * w_, 0.0) {}

    std::size_t size() const { return data.size(); }
    std::size_t plane() const { return h * w; }
    double* chan(std::size_t ni, std::size_t ci) { return data.data() + (ni * c + ci) * plane(); }
    const double* chan(std::size_t ni, std::size_t ci) const {
        return data.data() + (ni * c + ci) * plane();
    }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    static Tensor from_image(const ImageGrid& img) {
        Tensor t(1, 1, img.h, img.w);
        t.data = img.values;
        return t;
    }
    ImageGrid to_image() const {
        if (n != 1 || c != 1) throw shape_error("Tensor::to_image: expected a 1x1xHxW tensor");
        return ImageGrid(h, w, data);
    }
};

/// Named weight tensors with matching gradient slots. Entry order is fixed
/// at insertion time so optimizer sweeps are deterministic.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor weight;
        Tensor grad;
    };

    void add(const std::string& name, Tensor weight);
    bool has(const std::string& name) const { return index_.count(name) > 0; }

    Tensor& weight(const std::string& name) { return entry(name).weight; }
    const Tensor& weight(const std::string& name) const { return entry(name).weight; }
    Tensor& grad(const std::string& name) { return entry(name).grad; }

    const std::vector<Entry>& items() const { return items_; }
    std::vector<Entry>& items() { return items_; }
    std::size_t size() const { return items_.size(); }

    void zero_grads();
    /// grads += other's grads (matching names required).
    void accumulate_grads(const ParamStore& other, double scale = 1.0);
    void merge(const ParamStore& other); // append entries from another store

    void save(TensorContainer& out, const std::string& prefix = "") const;
    static ParamStore load(const TensorContainer& in, const std::string& prefix = "");

private:
    Entry& entry(const std::string& name);
    const Entry& entry(const std::string& name) const;

    std::vector<Entry> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

} // namespace deqmpi

#include "gda/nn/net.hpp"

#include "gda/core/digest.hpp"

namespace gda::nn {

void Net::save_into(TensorArchive& ar, const std::string& prefix) const {
    for (const auto& p : params(prefix)) ar.put(p.name, *p.value);
}

void Net::load_from(const TensorArchive& ar, const std::string& prefix) {
    for (auto& p : params(prefix)) {
        const Tensor& t = ar.get(p.name);
        check(t.shape() == p.value->shape(), "net: checkpoint shape mismatch at " + p.name);
        *p.value = t;
    }
}

uint64_t Net::weight_digest() const {
    Digest d;
    for (const auto& p : params()) {
        d.update(p.name);
        d.update(p.value->data(), static_cast<size_t>(p.value->numel()) * sizeof(float));
    }
    return d.value();
}

int64_t Net::param_count() const {
    int64_t n = 0;
    for (const auto& p : params())
        if (p.grad) n += p.value->numel();
    return n;
}

} // namespace gda::nn

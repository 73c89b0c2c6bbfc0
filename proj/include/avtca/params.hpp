#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "avtca/rng.hpp"
#include "avtca/tensor.hpp"

namespace avtca {

// A named trainable tensor plus its Adam moment accumulators. `decay`
// marks whether decoupled weight decay applies (off for biases and norm
// affine parameters).
template <typename S>
struct Parameter {
    std::string name;
    Tensor<S> value;
    std::vector<S> adam_m;
    std::vector<S> adam_v;
    bool decay = true;

    int64_t size() const { return value.size(); }
};

// Ordered table of parameters and persistent buffers (batch-norm running
// statistics). Registration order is the checkpoint order.
template <typename S>
class ParameterRegistry {
  public:
    using Ptr = std::shared_ptr<Parameter<S>>;

    Tensor<S> add(const std::string& name, Shape shape, std::vector<S> init, bool decay) {
        if (index_.count(name)) throw Error("duplicate parameter name: " + name);
        auto p = std::make_shared<Parameter<S>>();
        p->name = name;
        p->value = Tensor<S>::from(std::move(shape), std::move(init));
        p->value.set_requires_grad(true);
        p->decay = decay;
        index_[name] = params_.size();
        params_.push_back(p);
        return p->value;
    }

    // Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    Tensor<S> add_uniform(const std::string& name, Shape shape, int64_t fan_in, RngState& rng) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<S> init(static_cast<size_t>(numel(shape)));
        for (auto& v : init) v = static_cast<S>(rng.uniform(-bound, bound));
        return add(name, std::move(shape), std::move(init), true);
    }

    Tensor<S> add_const(const std::string& name, Shape shape, S fill, bool decay) {
        std::vector<S> init(static_cast<size_t>(numel(shape)), fill);
        return add(name, std::move(shape), std::move(init), decay);
    }

    void add_buffer(const std::string& name, std::shared_ptr<std::vector<S>> buf) {
        if (buffer_index_.count(name)) throw Error("duplicate buffer name: " + name);
        buffer_index_[name] = buffers_.size();
        buffers_.emplace_back(name, std::move(buf));
    }

    const std::vector<Ptr>& params() const { return params_; }
    const std::vector<std::pair<std::string, std::shared_ptr<std::vector<S>>>>& buffers() const {
        return buffers_;
    }

    Ptr find(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? nullptr : params_[it->second];
    }

    int64_t total_size() const {
        int64_t n = 0;
        for (const auto& p : params_) n += p->size();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p->value.zero_grad();
    }

  private:
    std::vector<Ptr> params_;
    std::map<std::string, size_t> index_;
    std::vector<std::pair<std::string, std::shared_ptr<std::vector<S>>>> buffers_;
    std::map<std::string, size_t> buffer_index_;
};

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.001;
};

// Adam with decoupled weight decay. The step counter is part of the
// optimizer (checkpointed alongside the moments).
template <typename S>
class Adam {
  public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    void step(ParameterRegistry<S>& reg) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (auto& p : reg.params()) {
            auto& value = p->value.mutable_data();
            const auto& grad = p->value.grad();
            if (grad.size() != value.size()) continue;  // never touched by backward
            if (p->adam_m.size() != value.size()) {
                p->adam_m.assign(value.size(), S(0));
                p->adam_v.assign(value.size(), S(0));
            }
            const double wd = p->decay ? cfg_.weight_decay : 0.0;
            for (size_t i = 0; i < value.size(); ++i) {
                const double g = static_cast<double>(grad[i]);
                double m = cfg_.beta1 * static_cast<double>(p->adam_m[i]) + (1.0 - cfg_.beta1) * g;
                double v = cfg_.beta2 * static_cast<double>(p->adam_v[i]) + (1.0 - cfg_.beta2) * g * g;
                p->adam_m[i] = static_cast<S>(m);
                p->adam_v[i] = static_cast<S>(v);
                const double mhat = m / bc1;
                const double vhat = v / bc2;
                double x = static_cast<double>(value[i]);
                x -= cfg_.lr * wd * x;
                x -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
                value[i] = static_cast<S>(x);
            }
        }
    }

    uint64_t step_count() const { return t_; }
    void set_step_count(uint64_t t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }

  private:
    AdamConfig cfg_;
    uint64_t t_ = 0;
};

}  // namespace avtca

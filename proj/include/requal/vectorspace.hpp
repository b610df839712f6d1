#pragma once

// Embedding-space arithmetic: cosine similarity and distance, plain and
// weighted centroids, nearest-neighbour search, per-dimension spread.
//
// All accumulation is double precision with Neumaier-compensated summation so
// that results do not depend on the platform's floating-point contraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "requal/error.hpp"

namespace requal {

/// Neumaier compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Norms below this are treated as a collapsed centroid.
inline constexpr double kDegenerateNorm = 1e-12;

/// A fixed-dimension, finite embedding vector with its Euclidean norm cached.
class EmbeddingVector {
public:
    EmbeddingVector() = default;

    explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) {
            throw Error(ErrorKind::DimensionMismatch, "embedding vector must have dimension >= 1");
        }
        CompensatedSum sq;
        for (double v : values_) {
            if (!std::isfinite(v)) {
                throw Error(ErrorKind::NonFiniteValue, "embedding vector contains NaN or Inf");
            }
            sq.add(v * v);
        }
        norm_ = std::sqrt(sq.value());
    }

    EmbeddingVector(std::initializer_list<double> values)
        : EmbeddingVector(std::vector<double>(values)) {}

    [[nodiscard]] std::size_t dim() const noexcept { return values_.size(); }
    [[nodiscard]] double norm() const noexcept { return norm_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    [[nodiscard]] EmbeddingVector scaled(double k) const {
        std::vector<double> out(values_);
        for (double& v : out) v *= k;
        return EmbeddingVector(std::move(out));
    }

    /// Unit-length copy. Throws ZeroNormVector below kDegenerateNorm.
    [[nodiscard]] EmbeddingVector normalized() const {
        if (norm_ < kDegenerateNorm) {
            throw Error(ErrorKind::ZeroNormVector, "cannot normalize a zero-norm vector");
        }
        return scaled(1.0 / norm_);
    }

    friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
        return a.values_ == b.values_;
    }

private:
    std::vector<double> values_;
    double norm_ = 0.0;
};

/// Per-sample weights in [0,1], index-aligned with a sample set.
class WeightVector {
public:
    WeightVector() = default;

    explicit WeightVector(std::vector<double> weights) : weights_(std::move(weights)) {
        for (double w : weights_) {
            if (!(w >= 0.0 && w <= 1.0)) {
                throw Error(ErrorKind::OutOfDomain, "weight outside [0,1]: " + std::to_string(w));
            }
        }
    }
    WeightVector(std::initializer_list<double> weights)
        : WeightVector(std::vector<double>(weights)) {}

    [[nodiscard]] std::size_t size() const noexcept { return weights_.size(); }
    [[nodiscard]] double operator[](std::size_t i) const { return weights_[i]; }
    [[nodiscard]] std::span<const double> values() const noexcept { return weights_; }

private:
    std::vector<double> weights_;
};

namespace detail {

inline void require_same_dim(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "dimensions " + std::to_string(a.dim()) + " and " + std::to_string(b.dim()));
    }
}

inline void require_uniform(std::span<const EmbeddingVector> vs) {
    if (vs.empty()) throw Error(ErrorKind::EmptySampleSet, "no vectors");
    for (const auto& v : vs) require_same_dim(vs.front(), v);
}

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.dim(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

}  // namespace detail

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    detail::require_same_dim(a, b);
    if (a.norm() == 0.0 || b.norm() == 0.0) {
        throw Error(ErrorKind::ZeroNormVector, "cosine similarity of a zero-norm vector");
    }
    const double raw = detail::dot(a, b) / (a.norm() * b.norm());
    if (std::abs(raw) > 1.0 + 1e-9) {
        throw std::logic_error("cosine similarity out of range: " + std::to_string(raw));
    }
    return std::clamp(raw, -1.0, 1.0);
}

inline double cosine_distance(const EmbeddingVector& a, const EmbeddingVector& b) {
    return 1.0 - cosine_similarity(a, b);
}

/// Coordinate-wise arithmetic mean. May return the zero vector; callers that
/// need a direction check norm() against kDegenerateNorm.
inline EmbeddingVector centroid(std::span<const EmbeddingVector> vs) {
    detail::require_uniform(vs);
    const std::size_t d = vs.front().dim();
    const double m = static_cast<double>(vs.size());
    std::vector<double> out(d);
    for (std::size_t k = 0; k < d; ++k) {
        CompensatedSum s;
        for (const auto& v : vs) s.add(v[k]);
        out[k] = s.value() / m;
    }
    return EmbeddingVector(std::move(out));
}

/// (1/m) * sum_i w_i v_i. The divisor is the sample count, not the weight
/// total; the direction (and so every cosine argmax) is the same either way.
inline EmbeddingVector weighted_centroid(std::span<const EmbeddingVector> vs, const WeightVector& w) {
    if (vs.empty()) throw Error(ErrorKind::EmptySampleSet, "no vectors");
    if (vs.size() != w.size()) {
        throw Error(ErrorKind::LengthMismatch, std::to_string(vs.size()) + " vectors but " +
                                                   std::to_string(w.size()) + " weights");
    }
    detail::require_uniform(vs);
    const std::size_t d = vs.front().dim();
    const double m = static_cast<double>(vs.size());
    std::vector<double> out(d);
    for (std::size_t k = 0; k < d; ++k) {
        CompensatedSum s;
        for (std::size_t i = 0; i < vs.size(); ++i) s.add(w[i] * vs[i][k]);
        out[k] = s.value() / m;
    }
    EmbeddingVector c(std::move(out));
    if (c.norm() < kDegenerateNorm) {
        throw Error(ErrorKind::DegenerateCentroid, "weighted centroid has zero norm");
    }
    return c;
}

/// Index of the vector most cosine-similar to c; ties go to the lowest index.
inline std::size_t nearest_to(std::span<const EmbeddingVector> vs, const EmbeddingVector& c) {
    if (vs.empty()) throw Error(ErrorKind::EmptySampleSet, "no vectors");
    if (c.norm() == 0.0) throw Error(ErrorKind::ZeroNormVector, "query vector has zero norm");
    std::size_t best = 0;
    double best_sim = cosine_similarity(vs[0], c);
    for (std::size_t i = 1; i < vs.size(); ++i) {
        const double s = cosine_similarity(vs[i], c);
        if (s > best_sim) {
            best_sim = s;
            best = i;
        }
    }
    return best;
}

/// Coordinate-wise sample standard deviation (divisor m-1).
inline EmbeddingVector per_dim_std(std::span<const EmbeddingVector> vs) {
    if (vs.size() < 2) {
        throw Error(ErrorKind::InsufficientSamples,
                    "standard deviation needs at least 2 samples, got " + std::to_string(vs.size()));
    }
    detail::require_uniform(vs);
    const std::size_t d = vs.front().dim();
    const double denom = static_cast<double>(vs.size() - 1);
    std::vector<double> out(d);
    // Welford: exact zero for constant coordinates.
    for (std::size_t k = 0; k < d; ++k) {
        double mean = 0.0;
        CompensatedSum m2;
        for (std::size_t i = 0; i < vs.size(); ++i) {
            const double x = vs[i][k];
            const double delta = x - mean;
            mean += delta / static_cast<double>(i + 1);
            m2.add(delta * (x - mean));
        }
        out[k] = std::sqrt(std::max(0.0, m2.value()) / denom);
    }
    return EmbeddingVector(std::move(out));
}

}  // namespace requal

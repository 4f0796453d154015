#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>

namespace attnlab {

/// Deterministic standard-normal stream: std::mt19937_64 feeding the basic
/// Box-Muller transform.
///
/// u1 = ((x >> 11) + 1) * 2^-53 in (0,1], u2 = (y >> 11) * 2^-53 in [0,1),
/// z0 = sqrt(-2 ln u1) cos(2 pi u2), z1 = sqrt(-2 ln u1) sin(2 pi u2);
/// the pair is consumed in order. Identical seeds give identical streams.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : eng_(seed) {}

    double next() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        const double u1 = static_cast<double>((eng_() >> 11) + 1) * 0x1p-53;
        const double u2 = static_cast<double>(eng_() >> 11) * 0x1p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * pi_ * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

    /// Fills row-major: (0,0), (0,1), ..., (1,0), ...
    Eigen::MatrixXd matrix(int rows, int cols, double std_dev) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c)
                m(r, c) = next() * std_dev;
        return m;
    }

    std::uint64_t next_raw() { return eng_(); }

private:
    static constexpr double pi_ = 3.141592653589793238462643383279502884;
    std::mt19937_64 eng_;
    bool have_cached_ = false;
    double cached_ = 0.0;
};

} // namespace attnlab

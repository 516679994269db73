#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace lbk {

// Velocities and momenta live in a fixed 3-slot array; in d=2 the third slot stays zero.
using Vec = std::array<double, 3>;

inline double dot(const Vec& x, const Vec& y) { return x[0] * y[0] + x[1] * y[1] + x[2] * y[2]; }
inline double norm(const Vec& x) { return std::sqrt(dot(x, x)); }
inline Vec operator+(const Vec& x, const Vec& y) { return {x[0] + y[0], x[1] + y[1], x[2] + y[2]}; }
inline Vec operator-(const Vec& x, const Vec& y) { return {x[0] - y[0], x[1] - y[1], x[2] - y[2]}; }
inline Vec operator*(double s, const Vec& x) { return {s * x[0], s * x[1], s * x[2]}; }
inline Vec cross(const Vec& x, const Vec& y)
{
    return {x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]};
}

// Symmetric d x d matrix stored densely in 3x3 slots.
struct Mat {
    std::array<double, 9> a{};

    double& operator()(int i, int j) { return a[3 * i + j]; }
    double operator()(int i, int j) const { return a[3 * i + j]; }

    Vec apply(const Vec& x) const
    {
        return {a[0] * x[0] + a[1] * x[1] + a[2] * x[2], a[3] * x[0] + a[4] * x[1] + a[5] * x[2],
                a[6] * x[0] + a[7] * x[1] + a[8] * x[2]};
    }
    double trace() const { return a[0] + a[4] + a[8]; }
    double frobenius() const
    {
        double s = 0;
        for (double v : a) s += v * v;
        return std::sqrt(s);
    }
    Mat& operator+=(const Mat& o)
    {
        for (int k = 0; k < 9; ++k) a[k] += o.a[k];
        return *this;
    }
};

inline Mat operator-(const Mat& x, const Mat& y)
{
    Mat r;
    for (int k = 0; k < 9; ++k) r.a[k] = x.a[k] - y.a[k];
    return r;
}

inline Mat outer(const Vec& x, const Vec& y)
{
    Mat m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = x[i] * y[j];
    return m;
}

enum class FieldKind : std::uint32_t { absolute = 0, perturbation = 1 };

// Error categories map one-to-one onto CLI exit codes.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

constexpr double pi = 3.14159265358979323846;

}

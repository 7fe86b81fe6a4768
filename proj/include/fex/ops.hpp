#pragma once

#include <array>
#include <cmath>
#include <string_view>

namespace fex {

// Fixed operator alphabets. Order matters: controller logits, operator
// sequences and serialized records all index into these lists.
enum Unary : int {
    kZero = 0,
    kOne,
    kId,
    kSquare,
    kCube,
    kQuartic,
    kExp,
    kSin,
    kCos,
    kTanh,
    kSigmoid,
};
inline constexpr int kUnaryCount = 11;

enum Binary : int {
    kAdd = 0,
    kSub,
    kMul,
};
inline constexpr int kBinaryCount = 3;

inline constexpr std::array<std::string_view, kUnaryCount> kUnaryNames = {
    "0", "1", "id", "square", "cube", "quartic",
    "exp", "sin", "cos", "tanh", "sigmoid"};
inline constexpr std::array<std::string_view, kBinaryCount> kBinaryNames = {"+", "-", "*"};

// During the search wild candidates are routine, so exp is evaluated with
// its argument clamped to ±50 (the derivative of the clamped function is 0
// beyond the clamp). Report mode evaluates the true exp; overflow then
// surfaces as a non-finite value rather than a crash.
enum class EvalMode { search, report };

inline constexpr double kExpClamp = 50.0;

struct UnaryDerivs {
    double g;   // g(x)
    double g1;  // g'(x)
    double g2;  // g''(x)
};

inline double unary_value(int op, double x, EvalMode mode) {
    switch (op) {
        case kZero: return 0.0;
        case kOne: return 1.0;
        case kId: return x;
        case kSquare: return x * x;
        case kCube: return x * x * x;
        case kQuartic: { const double x2 = x * x; return x2 * x2; }
        case kExp:
            if (mode == EvalMode::search) {
                if (x > kExpClamp) return std::exp(kExpClamp);
                if (x < -kExpClamp) return std::exp(-kExpClamp);
            }
            return std::exp(x);
        case kSin: return std::sin(x);
        case kCos: return std::cos(x);
        case kTanh: return std::tanh(x);
        case kSigmoid: return 1.0 / (1.0 + std::exp(-x));
        default: return 0.0;
    }
}

inline UnaryDerivs unary_derivs(int op, double x, EvalMode mode) {
    switch (op) {
        case kZero: return {0.0, 0.0, 0.0};
        case kOne: return {1.0, 0.0, 0.0};
        case kId: return {x, 1.0, 0.0};
        case kSquare: return {x * x, 2.0 * x, 2.0};
        case kCube: return {x * x * x, 3.0 * x * x, 6.0 * x};
        case kQuartic: {
            const double x2 = x * x;
            return {x2 * x2, 4.0 * x2 * x, 12.0 * x2};
        }
        case kExp: {
            if (mode == EvalMode::search && std::abs(x) > kExpClamp) {
                const double e = std::exp(x > 0 ? kExpClamp : -kExpClamp);
                return {e, 0.0, 0.0};
            }
            const double e = std::exp(x);
            return {e, e, e};
        }
        case kSin: {
            const double s = std::sin(x), c = std::cos(x);
            return {s, c, -s};
        }
        case kCos: {
            const double s = std::sin(x), c = std::cos(x);
            return {c, -s, -c};
        }
        case kTanh: {
            const double t = std::tanh(x);
            const double sech2 = 1.0 - t * t;
            return {t, sech2, -2.0 * t * sech2};
        }
        case kSigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            const double s1 = s * (1.0 - s);
            return {s, s1, s1 * (1.0 - 2.0 * s)};
        }
        default: return {0.0, 0.0, 0.0};
    }
}

}  // namespace fex

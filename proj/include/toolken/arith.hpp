#pragma once

// Arithmetic operator toolset: the 13-operator roster plus the basic-four
// subset. Integer-valued operators compute exactly in 64-bit integers when
// every input is integral; everything else runs in 64-bit floats.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "toolken/common.hpp"
#include "toolken/core.hpp"

namespace toolken {

struct ArithError : DataError {
    using DataError::DataError;
};

namespace detail {

constexpr double kIntExactLimit = 9007199254740992.0;  // 2^53

inline bool integral(double v) {
    return std::isfinite(v) && std::abs(v) <= kIntExactLimit && v == std::trunc(v);
}

inline int64_t as_int(double v) { return static_cast<int64_t>(v); }

inline void require(bool ok, const std::string& op, const std::vector<double>& args,
                    const std::string& why) {
    if (ok) return;
    std::string s = op + "(";
    for (size_t i = 0; i < args.size(); ++i) {
        if (i) s += ", ";
        s += render_number(args[i]);
    }
    throw ArithError(s + "): " + why);
}

inline int64_t gcd_ll(int64_t a, int64_t b) {
    while (b != 0) {
        int64_t t = a % b;
        a = b;
        b = t;
    }
    return a < 0 ? -a : a;
}

}  // namespace detail

struct ArithmeticOp {
    std::string name;
    int arity = 2;
    std::function<double(const std::vector<double>&)> eval;
};

// divide/remainder: divisor != 0; sqrt: arg >= 0; log/ln: arg > 0;
// lcm/gcd/choose/permutate: non-negative integers, k <= n for the counting
// ops; integer results must stay exactly representable (<= 2^53).
inline const std::vector<ArithmeticOp>& arithmetic_ops() {
    using detail::as_int;
    using detail::integral;
    using detail::require;
    static const std::vector<ArithmeticOp> ops = {
        {"add", 2,
         [](const std::vector<double>& a) {
             if (integral(a[0]) && integral(a[1])) {
                 double r = double(as_int(a[0]) + as_int(a[1]));
                 if (std::abs(r) <= detail::kIntExactLimit) return r;
             }
             return a[0] + a[1];
         }},
        {"subtract", 2,
         [](const std::vector<double>& a) {
             if (integral(a[0]) && integral(a[1])) {
                 double r = double(as_int(a[0]) - as_int(a[1]));
                 if (std::abs(r) <= detail::kIntExactLimit) return r;
             }
             return a[0] - a[1];
         }},
        {"multiply", 2,
         [](const std::vector<double>& a) {
             if (integral(a[0]) && integral(a[1])) {
                 long double r = static_cast<long double>(as_int(a[0])) * as_int(a[1]);
                 if (std::abs(double(r)) <= detail::kIntExactLimit)
                     return double(as_int(a[0]) * as_int(a[1]));
             }
             return a[0] * a[1];
         }},
        {"divide", 2,
         [](const std::vector<double>& a) {
             require(a[1] != 0.0, "divide", a, "division by zero");
             if (integral(a[0]) && integral(a[1]) && as_int(a[0]) % as_int(a[1]) == 0)
                 return double(as_int(a[0]) / as_int(a[1]));
             return a[0] / a[1];
         }},
        {"power", 2,
         [](const std::vector<double>& a) {
             if (integral(a[0]) && integral(a[1]) && a[1] >= 0 && a[1] <= 63) {
                 long double acc = 1.0L;
                 for (int64_t i = 0; i < as_int(a[1]); ++i) acc *= a[0];
                 if (std::abs(double(acc)) <= detail::kIntExactLimit) return double(acc);
             }
             double r = std::pow(a[0], a[1]);
             require(std::isfinite(r), "power", a, "result not finite");
             return r;
         }},
        {"sqrt", 1,
         [](const std::vector<double>& a) {
             require(a[0] >= 0.0, "sqrt", a, "argument must be non-negative");
             double r = std::sqrt(a[0]);
             if (integral(r) && r * r == a[0]) return std::trunc(r);
             return r;
         }},
        {"log", 1,
         [](const std::vector<double>& a) {
             require(a[0] > 0.0, "log", a, "argument must be positive");
             return std::log10(a[0]);
         }},
        {"ln", 1,
         [](const std::vector<double>& a) {
             require(a[0] > 0.0, "ln", a, "argument must be positive");
             return std::log(a[0]);
         }},
        {"lcm", 2,
         [](const std::vector<double>& a) {
             require(integral(a[0]) && integral(a[1]) && a[0] >= 0 && a[1] >= 0, "lcm", a,
                     "arguments must be non-negative integers");
             int64_t x = as_int(a[0]), y = as_int(a[1]);
             if (x == 0 || y == 0) return 0.0;
             int64_t g = detail::gcd_ll(x, y);
             long double r = static_cast<long double>(x / g) * y;
             require(double(r) <= detail::kIntExactLimit, "lcm", a, "result too large");
             return double((x / g) * y);
         }},
        {"gcd", 2,
         [](const std::vector<double>& a) {
             require(integral(a[0]) && integral(a[1]) && a[0] >= 0 && a[1] >= 0, "gcd", a,
                     "arguments must be non-negative integers");
             return double(detail::gcd_ll(as_int(a[0]), as_int(a[1])));
         }},
        {"remainder", 2,
         [](const std::vector<double>& a) {
             require(a[1] != 0.0, "remainder", a, "division by zero");
             if (integral(a[0]) && integral(a[1]))
                 return double(as_int(a[0]) % as_int(a[1]));
             return std::fmod(a[0], a[1]);
         }},
        {"choose", 2,
         [](const std::vector<double>& a) {
             require(integral(a[0]) && integral(a[1]) && a[0] >= 0 && a[1] >= 0, "choose", a,
                     "arguments must be non-negative integers");
             int64_t n = as_int(a[0]), k = as_int(a[1]);
             require(k <= n, "choose", a, "k must not exceed n");
             if (k > n - k) k = n - k;
             // multiplicative form keeps every intermediate integral
             unsigned __int128 acc = 1;
             for (int64_t i = 1; i <= k; ++i) {
                 acc = acc * static_cast<unsigned __int128>(n - k + i);
                 acc /= static_cast<unsigned __int128>(i);
                 require(acc <= static_cast<unsigned __int128>(detail::kIntExactLimit),
                         "choose", a, "result too large");
             }
             return double(static_cast<uint64_t>(acc));
         }},
        {"permutate", 2,
         [](const std::vector<double>& a) {
             require(integral(a[0]) && integral(a[1]) && a[0] >= 0 && a[1] >= 0, "permutate",
                     a, "arguments must be non-negative integers");
             int64_t n = as_int(a[0]), k = as_int(a[1]);
             require(k <= n, "permutate", a, "k must not exceed n");
             unsigned __int128 acc = 1;
             for (int64_t i = 0; i < k; ++i) {
                 acc *= static_cast<unsigned __int128>(n - i);
                 require(acc <= static_cast<unsigned __int128>(detail::kIntExactLimit),
                         "permutate", a, "result too large");
             }
             return double(static_cast<uint64_t>(acc));
         }},
    };
    return ops;
}

inline const ArithmeticOp& arithmetic_op(const std::string& name) {
    for (const auto& op : arithmetic_ops())
        if (op.name == name) return op;
    throw DataError("unknown arithmetic operator: " + name);
}

inline const std::vector<std::string>& basic_four() {
    static const std::vector<std::string> v = {"add", "subtract", "multiply", "divide"};
    return v;
}

inline double exec_arith(const std::string& name, const std::vector<double>& args) {
    const ArithmeticOp& op = arithmetic_op(name);
    if (static_cast<int>(args.size()) != op.arity)
        throw ArithError(name + ": expected " + std::to_string(op.arity) + " arguments, got " +
                         std::to_string(args.size()));
    for (double v : args)
        if (!std::isfinite(v)) throw ArithError(name + ": non-finite argument");
    return op.eval(args);
}

// Registers one toolken per operator and binds its executor. `names` defaults
// to the full 13-operator roster; pass basic_four() for the 4-op mode.
inline void register_arithmetic(ToolRegistry& registry,
                                const std::vector<std::string>& names = {}) {
    std::vector<std::string> roster = names;
    if (roster.empty())
        for (const auto& op : arithmetic_ops()) roster.push_back(op.name);
    for (const auto& name : roster) {
        const ArithmeticOp& op = arithmetic_op(name);
        ToolSpec spec;
        spec.name = op.name;
        spec.kind = ToolKind::FunctionWithArgs;
        if (op.arity == 1) {
            spec.arg_schema = {{"a", ArgKind::Number}};
        } else {
            spec.arg_schema = {{"a", ArgKind::Number}, {"b", ArgKind::Number}};
        }
        spec.description = "arithmetic operator " + op.name;
        registry.vocab().register_tool(spec);
        registry.bind(op.name, [name](const std::vector<ArgValue>& args) {
            std::vector<double> nums;
            nums.reserve(args.size());
            for (const auto& a : args) {
                if (!std::holds_alternative<double>(a))
                    throw ArithError(name + ": arguments must be numbers");
                nums.push_back(std::get<double>(a));
            }
            double r = exec_arith(name, nums);
            return ToolResult{render_number(r), r};
        });
    }
}

}  // namespace toolken

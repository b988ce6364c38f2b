#pragma once

// Test-only oracles, kept independent of the implementation paths they check:
// central finite differences for the training gradient, a nearest-centroid
// classifier, exact big-integer counting for choose/permutate, a long-double
// reference for the float operators, and a from-scratch mini-home ruleset.

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "toolken/common.hpp"
#include "toolken/lm.hpp"
#include "toolken/trainer.hpp"

namespace oracles {

// ---------------------------------------------------------------------------
// Central finite differences of the batch loss with respect to every W entry.

inline std::vector<double> finite_difference_grad(const toolken::LossBatch& batch,
                                                  std::vector<double> w, size_t tool_count,
                                                  double step = 1e-4) {
    std::vector<double> grad(w.size(), 0.0);
    for (size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + step;
        const double up = toolken::loss_and_grad(batch, w, tool_count).loss;
        w[i] = keep - step;
        const double down = toolken::loss_and_grad(batch, w, tool_count).loss;
        w[i] = keep;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

// ---------------------------------------------------------------------------
// Nearest-centroid classification over labelled vectors.

struct Centroids {
    std::vector<std::vector<double>> mean;  // per class

    static Centroids fit(const std::vector<std::vector<float>>& x,
                         const std::vector<size_t>& y, size_t classes) {
        Centroids c;
        c.mean.assign(classes, std::vector<double>(x.empty() ? 0 : x[0].size(), 0.0));
        std::vector<size_t> counts(classes, 0);
        for (size_t i = 0; i < x.size(); ++i) {
            for (size_t k = 0; k < x[i].size(); ++k) c.mean[y[i]][k] += x[i][k];
            ++counts[y[i]];
        }
        for (size_t j = 0; j < classes; ++j)
            if (counts[j])
                for (double& v : c.mean[j]) v /= double(counts[j]);
        return c;
    }

    size_t classify(const std::vector<float>& v) const {
        size_t best = 0;
        double best_d = HUGE_VAL;
        for (size_t j = 0; j < mean.size(); ++j) {
            double d = 0;
            for (size_t k = 0; k < v.size(); ++k) {
                double diff = double(v[k]) - mean[j][k];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        return best;
    }
};

// ---------------------------------------------------------------------------
// Exact counting via 128-bit integers (factorial-ratio form).

inline unsigned __int128 factorial_u128(int64_t n) {
    unsigned __int128 acc = 1;
    for (int64_t i = 2; i <= n; ++i) acc *= static_cast<unsigned __int128>(i);
    return acc;
}

inline double choose_oracle(int64_t n, int64_t k) {
    // n! / (k! (n-k)!) with the division done last, exactly
    return double(static_cast<uint64_t>(factorial_u128(n) /
                                        (factorial_u128(k) * factorial_u128(n - k))));
}

inline double permutate_oracle(int64_t n, int64_t k) {
    return double(static_cast<uint64_t>(factorial_u128(n) / factorial_u128(n - k)));
}

inline int64_t gcd_oracle(int64_t a, int64_t b) {
    // brute force over divisors; inputs stay small in tests
    int64_t g = 1;
    for (int64_t d = 1; d <= std::min(a, b); ++d)
        if (a % d == 0 && b % d == 0) g = d;
    return a == 0 ? b : (b == 0 ? a : g);
}

inline int64_t lcm_oracle(int64_t a, int64_t b) {
    if (a == 0 || b == 0) return 0;
    int64_t m = std::max(a, b);
    for (int64_t v = m;; v += m)
        if (v % a == 0 && v % b == 0) return v;
}

inline long double float_op_oracle(const std::string& name, const std::vector<double>& a) {
    if (name == "add") return (long double)a[0] + a[1];
    if (name == "subtract") return (long double)a[0] - a[1];
    if (name == "multiply") return (long double)a[0] * a[1];
    if (name == "divide") return (long double)a[0] / a[1];
    if (name == "power") return std::pow((long double)a[0], (long double)a[1]);
    if (name == "sqrt") return std::sqrt((long double)a[0]);
    if (name == "log") return std::log10((long double)a[0]);
    if (name == "ln") return std::log((long double)a[0]);
    if (name == "remainder") return std::fmod((long double)a[0], (long double)a[1]);
    throw std::runtime_error("no float oracle for " + name);
}

// ---------------------------------------------------------------------------
// Independent mini-home model: same rule semantics, written directly as
// branches instead of a rule table.

struct HomeModel {
    std::set<std::string> objects;
    std::map<std::string, std::set<std::string>> props;
    std::string at;
    std::optional<std::string> sitting, lying;
    std::set<std::string> holding;
    std::map<std::string, bool> open_state, on_state;

    bool has(const std::string& o) const { return objects.count(o) > 0; }
    bool prop(const std::string& o, const std::string& p) const {
        auto it = props.find(o);
        return it != props.end() && it->second.count(p) > 0;
    }

    // returns false (and leaves the state alone) when the step is invalid
    bool step(const std::string& action, const std::string& o) {
        if (action == "WALK" || action == "RUN" || action == "FIND") {
            if (!has(o) || sitting || lying) return false;
            at = o;
            return true;
        }
        if (action == "SIT") {
            if (!has(o) || !prop(o, "sittable") || at != o || sitting || lying) return false;
            sitting = o;
            return true;
        }
        if (action == "STANDUP") {
            if (sitting != std::optional<std::string>(o)) return false;
            sitting.reset();
            lying.reset();
            return true;
        }
        if (action == "GRAB") {
            if (!has(o) || prop(o, "room") || !prop(o, "grabbable") || at != o ||
                !holding.empty())
                return false;
            holding.insert(o);
            return true;
        }
        if (action == "DROP") {
            if (!holding.count(o)) return false;
            holding.erase(o);
            return true;
        }
        if (action == "OPEN") {
            if (!has(o) || !prop(o, "openable") || at != o || open_state[o]) return false;
            open_state[o] = true;
            return true;
        }
        if (action == "CLOSE") {
            if (!has(o) || !prop(o, "openable") || at != o || !open_state[o]) return false;
            open_state[o] = false;
            return true;
        }
        if (action == "SWITCHON") {
            if (!has(o) || !prop(o, "switchable") || at != o || on_state[o]) return false;
            on_state[o] = true;
            return true;
        }
        if (action == "SWITCHOFF") {
            if (!has(o) || !prop(o, "switchable") || at != o || !on_state[o]) return false;
            on_state[o] = false;
            return true;
        }
        if (action == "READ") return has(o) && prop(o, "readable") && holding.count(o);
        if (action == "WATCH") return has(o) && prop(o, "switchable") && on_state[o];
        if (action == "DRINK") return has(o) && prop(o, "drinkable") && holding.count(o);
        if (action == "EAT") return has(o) && prop(o, "edible") && holding.count(o);
        if (action == "LIE") {
            if (!has(o) || !prop(o, "lieable") || at != o || sitting || lying) return false;
            lying = o;
            return true;
        }
        if (action == "WAKEUP") {
            if (lying != std::optional<std::string>(o)) return false;
            sitting.reset();
            lying.reset();
            return true;
        }
        if (action == "SLEEP")
            return has(o) && prop(o, "lieable") && lying == std::optional<std::string>(o);
        if (action == "TOUCH") return has(o) && !prop(o, "room") && at == o;
        if (action == "LOOKAT") return has(o) && at == o;
        if (action == "TURNTO" || action == "POINTAT") return has(o);
        if (action == "PUSH" || action == "PULL")
            return has(o) && !prop(o, "room") && at == o && !sitting;
        if (action == "TYPE") return has(o) && prop(o, "typeable") && at == o;
        return false;
    }
};

}  // namespace oracles

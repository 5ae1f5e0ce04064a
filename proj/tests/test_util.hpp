#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cisr/cmdp.hpp"

namespace cisr_test {

inline std::string source_dir() {
    const char* dir = std::getenv("CISR_SOURCE_DIR");
    return dir ? dir : ".";
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Two-state chain: action 0 moves 0 -> 1 (terminal goal, reward 1), action 1
// stays at 0 with no reward.
inline cisr::TabularCMDP chain2(int horizon = 5) {
    std::vector<double> p(2 * 2 * 2, 0.0), r(2 * 2 * 2, 0.0);
    const auto idx = [](int s, int a, int t) { return (s * 2 + a) * 2 + t; };
    p[idx(0, 0, 1)] = 1.0;
    p[idx(0, 1, 0)] = 1.0;
    p[idx(1, 0, 1)] = 1.0;
    p[idx(1, 1, 1)] = 1.0;
    r[idx(0, 0, 1)] = 1.0;
    return cisr::build_cmdp(2, 2, horizon, p, r, {1.0, 0.0}, {0, 1}, {0, 0}, 0.5);
}

// Three-state fork: action 0 goes to the goal (reward 1), action 1 to the
// unsafe sink (reward 2). kappa decides which choice is feasible.
inline cisr::TabularCMDP fork3(double kappa, int horizon = 4) {
    std::vector<double> p(3 * 2 * 3, 0.0), r(3 * 2 * 3, 0.0);
    const auto idx = [](int s, int a, int t) { return (s * 2 + a) * 3 + t; };
    p[idx(0, 0, 1)] = 1.0;
    p[idx(0, 1, 2)] = 1.0;
    for (int a = 0; a < 2; ++a) {
        p[idx(1, a, 1)] = 1.0;
        p[idx(2, a, 2)] = 1.0;
    }
    r[idx(0, 0, 1)] = 1.0;
    r[idx(0, 1, 2)] = 2.0;
    return cisr::build_cmdp(3, 2, horizon, p, r, {1.0, 0.0, 0.0}, {0, 1, 1}, {0, 0, 1}, kappa);
}

// Six-state corridor with a risky shortcut, matching the prop-verification
// fixture: 0 -> 1 -> 2 -> goal 3 is safe; the shortcut action enters buffer 4
// and from there reaches the goal w.p. 0.7 or the unsafe sink 5 w.p. 0.3.
inline cisr::TabularCMDP corridor6(double kappa = 0.1, int horizon = 10) {
    const int n = 6, m = 2;
    std::vector<double> p(n * m * n, 0.0), r(n * m * n, 0.0);
    const auto idx = [&](int s, int a, int t) { return (s * m + a) * n + t; };
    p[idx(0, 0, 1)] = 1.0;
    p[idx(0, 1, 1)] = 1.0;
    p[idx(1, 0, 2)] = 1.0;
    p[idx(1, 1, 4)] = 1.0;
    p[idx(2, 0, 3)] = 1.0;
    p[idx(2, 1, 4)] = 1.0;
    p[idx(4, 0, 2)] = 1.0;
    p[idx(4, 1, 3)] = 0.7;
    p[idx(4, 1, 5)] = 0.3;
    for (int a = 0; a < m; ++a) {
        p[idx(3, a, 3)] = 1.0;
        p[idx(5, a, 5)] = 1.0;
    }
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) r[idx(s, a, 3)] = 1.0;
    std::vector<double> init(n, 0.0);
    init[0] = 1.0;
    return cisr::build_cmdp(n, m, horizon, p, r, init, {0, 0, 0, 1, 0, 1}, {0, 0, 0, 0, 0, 1},
                            kappa);
}

}  // namespace cisr_test

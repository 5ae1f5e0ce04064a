#include "cisr/frozen_lake.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "cisr/errors.hpp"

namespace cisr {

int GridMap::start_state() const {
    for (int s = 0; s < size(); ++s)
        if (cells[static_cast<std::size_t>(s)] == 'S') return s;
    throw MissingStart("grid map has no start cell");
}

std::vector<int> GridMap::holes() const {
    std::vector<int> out;
    for (int s = 0; s < size(); ++s)
        if (cells[static_cast<std::size_t>(s)] == 'H') out.push_back(s);
    return out;
}

std::vector<int> GridMap::goals() const {
    std::vector<int> out;
    for (int s = 0; s < size(); ++s)
        if (cells[static_cast<std::size_t>(s)] == 'G') out.push_back(s);
    return out;
}

std::string GridMap::render() const {
    std::string out;
    out.reserve(static_cast<std::size_t>(size() + height));
    for (int r = 0; r < height; ++r) {
        out.append(cells, static_cast<std::size_t>(r * width), static_cast<std::size_t>(width));
        out.push_back('\n');
    }
    return out;
}

GridMap parse_map(const std::string& text) {
    GridMap map;
    std::vector<std::string> rows;
    std::string row;
    std::istringstream in(text);
    while (std::getline(in, row)) rows.push_back(row);
    if (!rows.empty() && rows.back().empty()) rows.pop_back();
    if (rows.empty()) throw RaggedRows("grid map: no rows");

    map.height = static_cast<int>(rows.size());
    map.width = static_cast<int>(rows.front().size());
    if (map.width == 0) throw RaggedRows("grid map: empty first row");
    int starts = 0, goals = 0;
    for (int r = 0; r < map.height; ++r) {
        if (static_cast<int>(rows[r].size()) != map.width)
            throw RaggedRows("grid map: row " + std::to_string(r) + " has " +
                             std::to_string(rows[r].size()) + " cells, expected " +
                             std::to_string(map.width));
        for (int c = 0; c < map.width; ++c) {
            const char ch = rows[r][static_cast<std::size_t>(c)];
            if (ch != 'S' && ch != 'F' && ch != 'H' && ch != 'G')
                throw BadCharacter("grid map: bad character '" + std::string(1, ch) + "' at (" +
                                   std::to_string(r) + "," + std::to_string(c) + ")");
            if (ch == 'S') ++starts;
            if (ch == 'G') ++goals;
        }
        map.cells += rows[r];
    }
    if (starts != 1)
        throw MissingStart("grid map: expected exactly one start cell, found " +
                           std::to_string(starts));
    if (goals < 1) throw MissingStart("grid map: no goal cell");
    return map;
}

GridMap load_map_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigInvalid("cannot open map file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_map(buf.str());
}

namespace {

constexpr int kRowDelta[4] = {-1, 0, 0, 1};  // up, right, left, down
constexpr int kColDelta[4] = {0, 1, -1, 0};

int moved_cell(const GridMap& map, int s, int dir) {
    const int r = s / map.width + kRowDelta[dir];
    const int c = s % map.width + kColDelta[dir];
    if (r < 0 || r >= map.height || c < 0 || c >= map.width) return s;  // wall: stay
    return map.index(r, c);
}

}  // namespace

TabularCMDP build_flake_cmdp(const GridMap& map, const FrozenLakeConfig& config) {
    if (std::abs(config.p_intended + 2.0 * config.p_orthogonal - 1.0) > 1e-9)
        throw ConfigInvalid("frozen lake: p_intended + 2*p_orthogonal must be 1");
    const int S = map.size(), A = 4;
    std::vector<double> transition(static_cast<std::size_t>(S) * A * S, 0.0);
    std::vector<double> reward(static_cast<std::size_t>(S) * A * S, 0.0);
    std::vector<double> initial(static_cast<std::size_t>(S), 0.0);
    std::vector<std::uint8_t> terminal(static_cast<std::size_t>(S), 0);
    std::vector<std::uint8_t> unsafe(static_cast<std::size_t>(S), 0);

    initial[static_cast<std::size_t>(map.start_state())] = 1.0;
    for (int s = 0; s < S; ++s) {
        const char ch = map.cells[static_cast<std::size_t>(s)];
        if (ch == 'H') {
            terminal[static_cast<std::size_t>(s)] = 1;
            unsafe[static_cast<std::size_t>(s)] = 1;
        } else if (ch == 'G') {
            terminal[static_cast<std::size_t>(s)] = 1;
        }
    }

    // Orthogonal slips: up/down slip to left/right, left/right slip to up/down.
    static constexpr int kOrtho[4][2] = {{1, 2}, {0, 3}, {0, 3}, {1, 2}};
    auto row = [&](std::vector<double>& tensor, int s, int a) {
        return tensor.data() + (static_cast<std::size_t>(s) * A + a) * S;
    };
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double* p = row(transition, s, a);
            if (terminal[static_cast<std::size_t>(s)]) {
                p[s] = 1.0;
                continue;
            }
            p[moved_cell(map, s, a)] += config.p_intended;
            p[moved_cell(map, s, kOrtho[a][0])] += config.p_orthogonal;
            p[moved_cell(map, s, kOrtho[a][1])] += config.p_orthogonal;
            double* r = row(reward, s, a);
            for (int s2 = 0; s2 < S; ++s2) {
                if (p[s2] <= 0.0) continue;
                r[s2] = map.cells[static_cast<std::size_t>(s2)] == 'G' ? config.goal_reward
                                                                       : config.step_reward;
            }
        }

    return build_cmdp(S, A, config.horizon, std::move(transition), std::move(reward),
                      std::move(initial), std::move(terminal), std::move(unsafe), config.kappa);
}

std::vector<int> hole_distance(const GridMap& map) {
    std::vector<int> dist(static_cast<std::size_t>(map.size()), map.size());
    std::deque<int> frontier;
    for (int h : map.holes()) {
        dist[static_cast<std::size_t>(h)] = 0;
        frontier.push_back(h);
    }
    while (!frontier.empty()) {
        const int s = frontier.front();
        frontier.pop_front();
        for (int dir = 0; dir < 4; ++dir) {
            const int s2 = moved_cell(map, s, dir);
            if (dist[static_cast<std::size_t>(s2)] > dist[static_cast<std::size_t>(s)] + 1) {
                dist[static_cast<std::size_t>(s2)] = dist[static_cast<std::size_t>(s)] + 1;
                frontier.push_back(s2);
            }
        }
    }
    return dist;
}

const std::vector<std::string>& FrozenLakeInterventions::names() {
    static const std::vector<std::string> kNames = {"SR1", "SR2", "HR"};
    return kNames;
}

FrozenLakeInterventions make_flake_interventions(const GridMap& map, const TabularCMDP& base) {
    const std::vector<int> dist = hole_distance(map);
    std::vector<int> ring1, ring2;
    for (int s = 0; s < map.size(); ++s) {
        if (dist[static_cast<std::size_t>(s)] <= 1) ring1.push_back(s);
        if (dist[static_cast<std::size_t>(s)] <= 2) ring2.push_back(s);
    }
    auto mask = [&](const std::vector<int>& states) {
        std::vector<std::uint8_t> m(static_cast<std::size_t>(map.size()), 0);
        for (int s : states) m[static_cast<std::size_t>(s)] = 1;
        return m;
    };

    FrozenLakeInterventions out;
    out.sr1 = make_intervention("SR1", map.size(), ring1, ResetMode::to_previous_state,
                                nearest_safe_predecessor_kernel(base, mask(ring1)), 0.1, 0.0);
    out.sr2 = make_intervention("SR2", map.size(), ring2, ResetMode::to_previous_state,
                                nearest_safe_predecessor_kernel(base, mask(ring2)), 0.1, 0.0);
    out.hr = make_intervention("HR", map.size(), ring1, ResetMode::to_initial_distribution,
                               kernel_from_initial(base, mask(ring1)), 0.0, 0.0);
    return out;
}

const std::string& default_flake_map_text() {
    static const std::string kMap =
        "FFFFSFFFFF\n"
        "FFFFFFFFFF\n"
        "HHFFFFFHHH\n"
        "HHFFFFFHHH\n"
        "FFFFFFFFFF\n"
        "FFFFFFFFFF\n"
        "FFFFFFFFFF\n"
        "HHHFFFFFHH\n"
        "HHHFFFFFHH\n"
        "FFFFFGFFFF\n";
    return kMap;
}

}  // namespace cisr

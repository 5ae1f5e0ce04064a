#pragma once

#include <string>
#include <vector>

#include "cisr/cmdp.hpp"
#include "cisr/intervention.hpp"

namespace cisr {

// Rectangular grid of S (start), F (frozen), H (hole), G (goal), row-major.
struct GridMap {
    int width = 0;
    int height = 0;
    std::string cells;  // height * width characters

    int index(int row, int col) const { return row * width + col; }
    char at(int row, int col) const { return cells[static_cast<std::size_t>(index(row, col))]; }
    int size() const { return width * height; }
    int start_state() const;
    std::vector<int> holes() const;
    std::vector<int> goals() const;
    // One line per row, '\n' after each; parse(render()) is the identity.
    std::string render() const;
};

// Parses the text form. Throws BadCharacter (with row/col), RaggedRows,
// MissingStart (also for duplicate starts or missing goal).
GridMap parse_map(const std::string& text);
GridMap load_map_file(const std::string& path);

struct FrozenLakeConfig {
    double p_intended = 0.8;
    double p_orthogonal = 0.1;  // each side
    double goal_reward = 6.0;
    double step_reward = -0.01;
    double kappa = 0.1;
    int horizon = 200;
};

// 4 actions (up, right, left, down); slips to the orthogonal directions;
// moving off-grid stays in place; holes are unsafe terminal, goals terminal
// with goal_reward on entry, every other transition pays step_reward.
TabularCMDP build_flake_cmdp(const GridMap& map, const FrozenLakeConfig& config);

enum class FlakeAction { up = 0, right = 1, left = 2, down = 3 };

// Grid-graph (4-neighborhood) distance from each cell to the nearest hole;
// holes are 0, a map with no holes gives size() everywhere.
std::vector<int> hole_distance(const GridMap& map);

// SR1: trigger = cells within distance 1 of a hole (holes included), soft
// reset to the previous state, tau 0.1. SR2: distance 2, tau 0.1. HR: same
// trigger as SR1, reset to the initial distribution, tau 0. kappa_i = 0.
struct FrozenLakeInterventions {
    Intervention sr1;
    Intervention sr2;
    Intervention hr;

    std::vector<Intervention> library() const { return {sr1, sr2, hr}; }
    static const std::vector<std::string>& names();
};

FrozenLakeInterventions make_flake_interventions(const GridMap& map, const TabularCMDP& base);

// The committed 10x10 fixture (identical to data/frozen_lake_10x10.map).
const std::string& default_flake_map_text();

}  // namespace cisr

#pragma once

// Shared helpers for the unit and acceptance tests: fixture paths and
// random program / assignment generators.

#include <random>
#include <string>
#include <vector>

#include "sitespec/evaluator.hpp"
#include "sitespec/graph.hpp"
#include "sitespec/program.hpp"

namespace sitespec::testing {

std::string fixture(const std::string& relative);
Program fixture_program(const std::string& relative);
NormalizationConfig fixture_config(const std::string& relative);
SiteGraph fixture_graph(const std::string& dump, const std::string& config);

struct GenOptions {
    std::size_t max_nodes = 200;
    std::size_t variables = 8;
    int max_depth = 6;
    int max_arms = 4;
    // Chance that an arm reuses an already built sub-program.
    double share = 0.15;
    double inclusive = 0.5;
    bool exclusive_only = false;
    // Keeps brute-force path enumeration cheap.
    std::size_t max_paths = 3000;
};

std::string var_name(std::size_t i);

// Random DAG program: exclusive selectors never repeat a guard; inclusive
// ones may. Leaves carry distinct origins and a few random bindings.
Program random_program(std::mt19937& rng, const GenOptions& options = {});

// Each of `variables` names is True, False or Unknown with the given odds.
Assignment random_assignment(std::mt19937& rng, std::size_t variables, double p_true, double p_false);

// Every variable assigned.
Assignment random_full_assignment(std::mt19937& rng, std::size_t variables, double p_true);

// Splits `a` into two disjoint parts at random.
std::pair<Assignment, Assignment> random_split(std::mt19937& rng, const Assignment& a);

std::size_t path_count(const Program& program);

// A random printable label mixing letters, digits, separators and a few
// multi-byte characters.
std::string random_label(std::mt19937& rng, std::size_t max_len = 24);

}  // namespace sitespec::testing

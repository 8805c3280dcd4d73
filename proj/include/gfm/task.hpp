#ifndef GFM_TASK_HPP
#define GFM_TASK_HPP

#include <algorithm>
#include <sstream>

#include "gfm/graph.hpp"

namespace gfm {

enum class TaskKind { SP, GTSP, TPSOD, TPDOD };

inline const char* to_string(TaskKind k) {
    switch (k) {
        case TaskKind::SP: return "sp";
        case TaskKind::GTSP: return "gtsp";
        case TaskKind::TPSOD: return "tpsod";
        case TaskKind::TPDOD: return "tpdod";
    }
    return "?";
}

inline TaskKind task_kind_from_string(const std::string& s) {
    if (s == "sp") return TaskKind::SP;
    if (s == "gtsp") return TaskKind::GTSP;
    if (s == "tpsod") return TaskKind::TPSOD;
    if (s == "tpdod") return TaskKind::TPDOD;
    throw std::invalid_argument("unknown task kind: " + s);
}

// source: SP s / tour depot o / TPDOD origin. target: SP t / TPDOD
// destination (unused otherwise). required: R (empty for SP).
struct TaskSpec {
    TaskKind kind = TaskKind::SP;
    int source = -1;
    int target = -1;
    std::vector<int> required;

    void validate(const Graph& g) const {
        auto in_range = [&](int v) { return v >= 0 && v < g.node_count(); };
        if (!in_range(source)) throw std::invalid_argument("TaskSpec: bad source");
        const bool needs_target = kind == TaskKind::SP || kind == TaskKind::TPDOD;
        if (needs_target && !in_range(target)) throw std::invalid_argument("TaskSpec: bad target");
        if (kind == TaskKind::TPDOD && source == target)
            throw std::invalid_argument("TaskSpec: TPDOD needs source != target");
        if (kind == TaskKind::SP && !required.empty())
            throw std::invalid_argument("TaskSpec: SP takes no required set");
        for (int r : required)
            if (!in_range(r)) throw std::invalid_argument("TaskSpec: required node out of range");
    }
};

struct Solution {
    std::vector<int> walk;
    double objective_km = 0.0;
    bool feasible = false;
    double runtime_s = 0.0;
    std::string method_tag;
};

// Sum of edge weights over consecutive pairs; throws on a non-edge hop.
inline double objective(const Graph& g, const std::vector<int>& walk) {
    double total = 0.0;
    for (std::size_t i = 1; i < walk.size(); ++i) total += g.edge_weight(walk[i - 1], walk[i]);
    return total;
}

// Verifies edge validity, kind-specific endpoints, and R coverage.
// Reports every violation, not just the first.
inline std::pair<bool, std::vector<std::string>> feasibility_check(const Graph& g,
                                                                   const TaskSpec& spec,
                                                                   const std::vector<int>& walk) {
    std::vector<std::string> violations;
    if (walk.empty()) {
        violations.push_back("empty walk");
        return {false, violations};
    }
    for (std::size_t i = 1; i < walk.size(); ++i) {
        if (!g.has_edge(walk[i - 1], walk[i])) {
            std::ostringstream os;
            os << "non-edge (" << walk[i - 1] << "," << walk[i] << ")";
            violations.push_back(os.str());
        }
    }
    if (walk.front() != spec.source)
        violations.push_back("walk does not start at " + std::to_string(spec.source));
    const int want_end = (spec.kind == TaskKind::SP || spec.kind == TaskKind::TPDOD)
                             ? spec.target
                             : spec.source;
    if (walk.back() != want_end)
        violations.push_back("walk does not end at " + std::to_string(want_end));
    for (int r : spec.required)
        if (std::find(walk.begin(), walk.end(), r) == walk.end())
            violations.push_back("missing required " + std::to_string(r));
    return {violations.empty(), violations};
}

} // namespace gfm

#endif // GFM_TASK_HPP

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lbs/ast.hpp"
#include "lbs/rng.hpp"

// Stochastic event selection: the Gillespie direct method over reaction
// propensities. Movement branches are non-deterministic in the calculus;
// they enter the race as pseudo-reactions with the configurable rate
// lambda_mov so a single exact clock drives both.

namespace lbs {

enum class EventKind { Delay, Com, Move };

inline const char* event_kind_name(EventKind k) {
    switch (k) {
    case EventKind::Delay: return "delay";
    case EventKind::Com: return "com";
    case EventKind::Move: return "move";
    }
    return "?";
}

struct EventDesc {
    EventKind kind = EventKind::Delay;
    double propensity = 0.0;
    size_t entity_a = 0; // delay/move subject, com sender
    int branch_a = -1;
    size_t entity_b = SIZE_MAX; // com receiver
    int branch_b = -1;
    std::string channel; // com only
};

struct EventSet {
    std::vector<EventDesc> events;
    double total = 0.0;

    void add(EventDesc d) {
        total += d.propensity;
        events.push_back(std::move(d));
    }
};

struct SchedulerConfig {
    double lambda_mov = 1.0; // pseudo-rate of each movement branch
};

// Movement propensity of one entity's mov branch. A global knob in this
// version; the entity and definitions are part of the contract so positional
// policies can slot in without touching call sites.
template <typename Entity, typename Defs>
double movement_propensity(const Entity&, const Defs&, const SchedulerConfig& cfg) {
    return cfg.lambda_mov;
}

// Direct method: dt ~ Exponential(total), event picked with probability
// propensity/total. Returns nothing when the set is empty (NoEvent).
inline std::optional<std::pair<size_t, double>> select_event(const EventSet& set, Rng& rng) {
    if (set.events.empty() || !(set.total > 0.0)) return std::nullopt;
    double dt = rng.exponential(set.total);
    double r = rng.uniform() * set.total;
    double acc = 0.0;
    for (size_t i = 0; i < set.events.size(); ++i) {
        acc += set.events[i].propensity;
        if (r < acc) return std::make_pair(i, dt);
    }
    return std::make_pair(set.events.size() - 1, dt);
}

// Redraw among the events not yet excluded, without advancing the clock.
// Used when a selected event cannot produce a space-consistent state.
inline std::optional<size_t> pick_event(const EventSet& set, const std::vector<bool>& excluded, Rng& rng) {
    double total = 0.0;
    for (size_t i = 0; i < set.events.size(); ++i)
        if (!excluded[i]) total += set.events[i].propensity;
    if (!(total > 0.0)) return std::nullopt;
    double r = rng.uniform() * total;
    double acc = 0.0;
    size_t last = SIZE_MAX;
    for (size_t i = 0; i < set.events.size(); ++i) {
        if (excluded[i]) continue;
        last = i;
        acc += set.events[i].propensity;
        if (r < acc) return i;
    }
    return last == SIZE_MAX ? std::nullopt : std::make_optional(last);
}

} // namespace lbs

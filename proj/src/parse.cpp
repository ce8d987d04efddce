// SPDX-License-Identifier: Apache-2.0
#include "bbpose/parse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace bbpose {

void ParseConfig::validate() const
{
    if (std::abs(alpha + beta + gamma - 1.0) > 1e-9) throw std::invalid_argument("alpha + beta + gamma must be 1");
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must be in [0,1]");
    if (!(box_margin >= 0.0)) throw std::invalid_argument("box_margin must be >= 0");
}

namespace {

BoundingBox grown(const BoundingBox& b, double margin)
{
    return {b.x_min - margin, b.y_min - margin, b.x_max + margin, b.y_max + margin};
}

}  // namespace

std::vector<AssembledPose> parse_box(const BoundingBox& box, std::span<const CandidateJoint> candidates,
                                     std::span<const CandidateConnection> connections, const Skeleton& skeleton,
                                     const ParseConfig& cfg)
{
    const BoundingBox region = grown(box, cfg.box_margin);
    std::unordered_map<int, const CandidateJoint*> inside;
    for (const CandidateJoint& c : candidates) {
        if (region.contains(c.location)) inside.emplace(c.id, &c);
    }
    if (inside.empty()) return {};

    std::array<std::vector<CandidateConnection>, kNumLimbs> per_limb;
    for (const CandidateConnection& conn : connections) {
        if (conn.limb_class < 0 || conn.limb_class >= kNumLimbs) continue;
        if (!inside.contains(conn.start) || !inside.contains(conn.end)) continue;
        per_limb[conn.limb_class].push_back(conn);
    }

    std::vector<AssembledPose> persons;
    std::unordered_map<int, std::size_t> owner;
    const auto add_joint = [&](std::size_t person, const CandidateJoint& c) {
        auto& slot = persons[person].pose.joints[c.joint_class];
        if (slot) throw std::logic_error("parse_box: joint slot filled twice");
        slot = PoseJoint{c.location, c.score, c.id};
        owner.emplace(c.id, person);
    };

    for (int limb = 0; limb < kNumLimbs; ++limb) {
        auto& conns = per_limb[limb];
        std::stable_sort(conns.begin(), conns.end(), [](const CandidateConnection& l, const CandidateConnection& r) {
            if (l.score != r.score) return l.score > r.score;
            if (l.start != r.start) return l.start < r.start;
            return l.end < r.end;
        });

        std::vector<CandidateConnection> accepted;
        std::set<int> used_starts;
        std::set<int> used_ends;
        for (const CandidateConnection& conn : conns) {
            if (conn.score < cfg.min_connection_score) break;
            if (used_starts.contains(conn.start) || used_ends.contains(conn.end)) continue;
            used_starts.insert(conn.start);
            used_ends.insert(conn.end);
            accepted.push_back(conn);
        }

        for (const CandidateConnection& conn : accepted) {
            const CandidateJoint& start = *inside.at(conn.start);
            const CandidateJoint& end = *inside.at(conn.end);
            if (start.joint_class != skeleton.limbs[limb].parent || end.joint_class != skeleton.limbs[limb].child) {
                throw std::invalid_argument("parse_box: connection joint classes do not match its limb");
            }
            // With depth-first limb order each joint class is the child of
            // exactly one limb, so the end joint cannot be owned yet.
            if (owner.contains(end.id)) throw std::logic_error("parse_box: end joint already assigned");

            std::size_t person;
            if (auto it = owner.find(start.id); it == owner.end()) {
                person = persons.size();
                persons.push_back({});
                persons.back().pose.source_box = box;
                add_joint(person, start);
            } else {
                person = it->second;
            }
            add_joint(person, end);
            persons[person].connection_scores.push_back(conn.score);
        }
    }
    return persons;
}

double pose_confidence(const Pose& pose, std::span<const double> connection_scores, const BoundingBox& box,
                       const ParseConfig& cfg)
{
    double joint_sum = 0.0;
    int joints = 0;
    for (const auto& j : pose.joints) {
        if (!j) continue;
        joint_sum += j->score;
        ++joints;
    }
    const double s1 = joints > 0 ? joint_sum / joints : 0.0;

    const double conn_sum = std::accumulate(connection_scores.begin(), connection_scores.end(), 0.0);
    double s2 = 0.0;
    if (cfg.connection_mean_over_all_limbs) {
        s2 = conn_sum / kNumLimbs;
    } else if (!connection_scores.empty()) {
        s2 = conn_sum / static_cast<double>(connection_scores.size());
    }

    double area_ratio = 0.0;
    if (const auto bounds = pose.joint_bounds(); bounds && box.area() > 0.0) {
        area_ratio = bounds->area() / box.area();
    }
    return cfg.alpha * s1 + cfg.beta * s2 + cfg.gamma * area_ratio;
}

double pose_distance(const Pose& a, const Pose& b)
{
    const int n = std::max(a.joint_count(), b.joint_count());
    if (n == 0) throw std::invalid_argument("pose_distance: both poses are empty");
    int unmatched = 0;
    for (int j = 0; j < kNumJoints; ++j) {
        const auto& ja = a.joints[j];
        const auto& jb = b.joints[j];
        if (!ja && !jb) continue;
        if (!ja || !jb) {
            ++unmatched;
            continue;
        }
        const bool same = (ja->candidate_id && jb->candidate_id) ? *ja->candidate_id == *jb->candidate_id
                                                                 : distance(ja->location, jb->location) <= 1.0;
        if (!same) ++unmatched;
    }
    return static_cast<double>(unmatched) / n;
}

namespace {

// Distance that treats an empty pose as maximally different from anything.
double safe_distance(const Pose& a, const Pose& b)
{
    if (a.joint_count() == 0 && b.joint_count() == 0) return 0.0;
    return pose_distance(a, b);
}

std::vector<std::size_t> confidence_order(const std::vector<ParsedPose>& poses)
{
    std::vector<std::size_t> order(poses.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (poses[l].confidence != poses[r].confidence) return poses[l].confidence > poses[r].confidence;
        return poses[l].box_index < poses[r].box_index;
    });
    return order;
}

}  // namespace

std::vector<ParsedPose> pose_nms(std::vector<ParsedPose> poses, const ParseConfig& cfg)
{
    const auto order = confidence_order(poses);
    std::vector<bool> eliminated(poses.size(), false);
    std::vector<std::size_t> kept;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t ref = order[rank];
        if (eliminated[ref]) continue;
        kept.push_back(ref);
        for (std::size_t later = rank + 1; later < order.size(); ++later) {
            const std::size_t other = order[later];
            if (!eliminated[other] && safe_distance(poses[ref].pose, poses[other].pose) <= cfg.eta) {
                eliminated[other] = true;
            }
        }
    }

    std::set<int> boxes_taken;
    std::vector<ParsedPose> survivors;
    for (std::size_t idx : kept) {
        if (!boxes_taken.insert(poses[idx].box_index).second) continue;
        survivors.push_back(std::move(poses[idx]));
    }
    return survivors;
}

Pose complete_pose(const Pose& pose, std::span<const CandidateJoint> candidates, std::set<int>& assigned,
                   const ParseConfig& cfg)
{
    Pose out = pose;
    if (!pose.source_box) return out;
    const BoundingBox box = grown(*pose.source_box, cfg.box_margin);

    std::vector<const CandidateJoint*> ranked;
    for (const CandidateJoint& c : candidates) {
        if (box.contains(c.location)) ranked.push_back(&c);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const CandidateJoint* l, const CandidateJoint* r) {
        if (l->score != r->score) return l->score > r->score;
        return l->id < r->id;
    });

    for (int j = 0; j < kNumJoints; ++j) {
        if (out.joints[j]) continue;
        for (const CandidateJoint* c : ranked) {
            if (c->joint_class != j || assigned.contains(c->id)) continue;
            // Ranked by score, so nothing later can qualify either.
            if (c->score < cfg.completion_min_score) break;
            out.joints[j] = PoseJoint{c->location, c->score, c->id};
            assigned.insert(c->id);
            break;
        }
    }
    return out;
}

namespace {

// Indices of the boxes containing each candidate, keyed by position in the
// candidate list.
std::vector<std::vector<int>> box_membership(std::span<const CandidateJoint> candidates,
                                             std::span<const BoundingBox> boxes, double margin)
{
    std::vector<std::vector<int>> members(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        for (std::size_t b = 0; b < boxes.size(); ++b) {
            if (grown(boxes[b], margin).contains(candidates[i].location)) members[i].push_back(static_cast<int>(b));
        }
    }
    return members;
}

}  // namespace

std::vector<ParsedPose> parse_scene(std::span<const BoundingBox> boxes, const FieldMaps& maps,
                                    const Skeleton& skeleton, const PipelineConfig& pipeline)
{
    pipeline.parse.validate();
    pipeline.detect.validate();
    if (boxes.empty()) return {};
    check_field_maps(maps);
    PipelineConfig cfg = pipeline;
    cfg.parse.box_margin = std::max(cfg.parse.box_margin, 0.5 * maps.confidence.front().stride());

    const auto candidates = detect_all_peaks(maps.confidence, cfg.detect);

    // Only pairs sharing a box can ever be connected; skip scoring the rest.
    const auto members = box_membership(candidates, boxes, cfg.parse.box_margin);
    std::unordered_map<int, std::size_t> position;
    for (std::size_t i = 0; i < candidates.size(); ++i) position.emplace(candidates[i].id, i);
    const PairFilter share_box = [&](const CandidateJoint& a, const CandidateJoint& b) {
        const auto& ma = members[position.at(a.id)];
        const auto& mb = members[position.at(b.id)];
        for (int x : ma) {
            if (std::find(mb.begin(), mb.end(), x) != mb.end()) return true;
        }
        return false;
    };
    const auto connections = score_all_connections(candidates, maps.direction, skeleton, cfg.detect, share_box);

    std::vector<ParsedPose> parsed;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
        for (AssembledPose& a : parse_box(boxes[b], candidates, connections, skeleton, cfg.parse)) {
            const double conf = pose_confidence(a.pose, a.connection_scores, boxes[b], cfg.parse);
            parsed.push_back({std::move(a.pose), conf, static_cast<int>(b)});
        }
    }

    if (cfg.pose_nms) {
        parsed = pose_nms(std::move(parsed), cfg.parse);
    } else {
        const auto order = confidence_order(parsed);
        std::vector<ParsedPose> sorted;
        sorted.reserve(parsed.size());
        for (std::size_t i : order) sorted.push_back(std::move(parsed[i]));
        parsed = std::move(sorted);
    }

    if (cfg.pose_completion) {
        std::set<int> assigned;
        for (const ParsedPose& p : parsed) {
            for (const auto& j : p.pose.joints) {
                if (j && j->candidate_id) assigned.insert(*j->candidate_id);
            }
        }
        for (ParsedPose& p : parsed) p.pose = complete_pose(p.pose, candidates, assigned, cfg.parse);
    }
    return parsed;
}

}  // namespace bbpose

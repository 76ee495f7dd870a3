#pragma once

#include "rigrecon/archive.hpp"
#include "rigrecon/loss.hpp"

namespace rigrecon {

/// Fuses canonical pointmaps, selects the sparse co-visibility graph from the
/// archive scores and attaches the archive matches to its edges.
/// Throws PoseIndexMismatch when a view references a pose the trajectory does
/// not have, InsufficientPoses when a camera sees fewer than two poses.
CalibrationProblem make_problem(const Archive& archive, const RobotTrajectory& trajectory,
                                const GraphOptions& options = {});

}  // namespace rigrecon

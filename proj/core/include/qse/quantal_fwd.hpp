#pragma once

namespace qse {
struct FollowerSolution;
}

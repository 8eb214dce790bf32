#include "rsdiff/jump.hpp"

#include <cmath>

namespace rsdiff {

GammaPartition build_gamma(const QMatrixSample& q) {
    const int n = static_cast<int>(q.entries.rows());
    GammaPartition p;
    p.lo = Mat::Zero(n, n);
    p.hi = Mat::Zero(n, n);
    p.row_offset = Vec::Zero(n);
    p.exit_rate = Vec::Zero(n);

    double offset = 0.0;
    for (int i = 0; i < n; ++i) {
        p.row_offset(i) = offset;
        double cursor = offset;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double width = q.entries(i, j);
            p.lo(i, j) = cursor;
            p.hi(i, j) = cursor + width;
            cursor += width;
        }
        p.exit_rate(i) = cursor - offset;
        offset = cursor;
    }
    return p;
}

int h_eval(const GammaPartition& partition, StateIndex i, double z) {
    const int n = static_cast<int>(partition.lo.rows());
    const int row = i.k - 1;
    if (row < 0 || row >= n) throw DimensionMismatch("h_eval: state index out of range");
    if (z < partition.row_offset(row) || z >= partition.row_offset(row) + partition.exit_rate(row))
        return 0;
    for (int j = 0; j < n; ++j) {
        if (j == row) continue;
        if (z >= partition.lo(row, j) && z < partition.hi(row, j)) return j - row;
    }
    return 0;
}

std::optional<JumpEvent> sample_switch_thinning(const Mat& q_at_x, int i, double c_q, double dt,
                                                Philox& rng) {
    const int n = static_cast<int>(q_at_x.rows());
    const int row = i - 1;

    double offset = 0.0;
    for (int m = 0; m < row; ++m)
        for (int j = 0; j < n; ++j)
            if (j != m) offset += q_at_x(m, j);
    double exit = 0.0;
    for (int j = 0; j < n; ++j)
        if (j != row) exit += q_at_x(row, j);
    if (exit > c_q * (1.0 + 1e-12))
        throw BoundViolated("observed exit rate q_i(x) exceeds the dominating rate c_q");

    const double u = rng.uniform();
    if (u >= 1.0 - std::exp(-c_q * dt)) return std::nullopt;

    const double z = offset + c_q * rng.uniform();
    JumpEvent ev;
    ev.mark_z = z;
    ev.from_state = i;
    ev.to_state = i;
    ev.accepted = false;

    double cursor = offset;
    for (int j = 0; j < n; ++j) {
        if (j == row) continue;
        const double hi = cursor + q_at_x(row, j);
        if (z >= cursor && z < hi) {
            ev.to_state = j + 1;
            ev.accepted = true;
            break;
        }
        cursor = hi;
    }
    return ev;
}

}  // namespace rsdiff

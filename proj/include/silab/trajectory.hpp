#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "silab/param_vector.hpp"

namespace silab {

// One recorded row of a training run. Metrics that do not apply (no test set,
// no classifier head, no trace estimate) are stored as NaN.
struct TrajectoryPoint {
    std::size_t step = 0;
    double eta = 0.0;
    double lambda = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_loss = 0.0;
    double test_acc = 0.0;
    double norm_sq = 0.0;
    double eff_lr = 0.0;  // eta / ||w||^2
    double trace_est = 0.0;
};

struct TrajectoryRecord {
    std::vector<TrajectoryPoint> points;
    std::map<std::size_t, ParamVector> snapshots;  // step -> parameters

    const ParamVector& snapshot_at(std::size_t step) const {
        const auto it = snapshots.find(step);
        if (it == snapshots.end())
            throw std::invalid_argument("no snapshot recorded at step " + std::to_string(step));
        return it->second;
    }
};

inline void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << "step,eta,lambda,train_loss,train_acc,test_loss,test_acc,norm_sq,eff_lr,trace_est\n";
    char buf[256];
    for (const auto& p : rec.points) {
        std::snprintf(buf, sizeof buf,
                      "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", p.step,
                      p.eta, p.lambda, p.train_loss, p.train_acc, p.test_loss, p.test_acc,
                      p.norm_sq, p.eff_lr, p.trace_est);
        f << buf;
    }
}

}  // namespace silab

#pragma once

#include <Eigen/Dense>

#include <vector>

#include "peelfield/fem.hpp"
#include "peelfield/inverse.hpp"
#include "peelfield/sources.hpp"

namespace peelfield {

// Per-source forward-accuracy comparison between two lead fields.
struct ForwardComparison {
  std::vector<double> rdm;           // in [0, 2]
  std::vector<double> mag;           // >= 0
  std::vector<double> eccentricity;  // ||x|| / R_inner, in [0, 1)
};

// Per-source shape and magnitude errors: each source's three Cartesian
// columns are stacked into one sensor-indexed block vector v; then
// RDM = ||v_n/||v_n|| - v_a/||v_a|||| and MAG = |1 - ||v_a||/||v_n||||.
// Eccentricities are left empty (filled by sphere-aware callers).
ForwardComparison rdm_mag(const LeadField& L_n, const LeadField& L_a);

// Same measures for a single direction d per source: v = L_block * d.
ForwardComparison rdm_mag_directed(const LeadField& L_n, const LeadField& L_a,
                                   const std::vector<Eigen::Vector3d>& dirs);

struct LocalisationError {
  double scaled_mm = 0.0;  // ||true - x_I|| / sqrt(3)
  double raw_mm = 0.0;     // plain Euclidean distance
};

// Distance from the true position to the argmax position of the
// reconstruction, with the Cartesian-triplet 1/sqrt(3) scaling.
LocalisationError localisation_error(const Vec3& true_pos,
                                     const Reconstruction& recon,
                                     const SourceSpace& sources);

struct Dispersion {
  double sd_mm = 0.0;
  bool degenerate = false;  // all moments in the ROI were zero
};

// Moment-weighted RMS spread of the reconstruction around source `center`,
// over sources within roi_mm.
Dispersion spatial_dispersion(const Reconstruction& recon,
                              const SourceSpace& sources, int center_index,
                              double roi_mm);

// Entries strictly greater than mu_ref + 2 sigma_ref.
int outlier_count(const std::vector<double>& deltas, double mu_ref,
                  double sigma_ref);

// Published reference (mu, sigma) localisation-error pairs per SNR used for
// outlier thresholds; throws ConfigError for an unlisted SNR.
struct OutlierReference {
  double mu_mm;
  double sigma_mm;
};
OutlierReference cuffin_reference(double snr_db);

// Sample mean and (n-1)-denominator standard deviation.
struct SampleStats {
  double mean = 0.0;
  double stddev = 0.0;
  int count = 0;
};
SampleStats sample_stats(const std::vector<double>& values);

}  // namespace peelfield

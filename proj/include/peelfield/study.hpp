#pragma once

#include <string>
#include <vector>

#include "peelfield/experiment.hpp"
#include "peelfield/metrics.hpp"

namespace peelfield {

struct StudyRow {
  int source_id;
  double snr_db;
  double depth_mm;
  std::string method;
  double delta_mm_scaled;
  double delta_mm_raw;
};

struct StudySummaryRow {
  std::string method;
  double snr_db;
  double depth_mm;
  double mean_mm;    // of delta_mm_scaled
  double stddev_mm;
  int outliers;      // vs published reference; -1 when SNR untabulated
  int count;
};

struct DispersionRow {
  int source_id;
  std::string method;
  double sd_mm;
};

struct StudyReport {
  std::vector<StudyRow> rows;
  std::vector<StudySummaryRow> summary;
  std::vector<DispersionRow> dispersion;
  std::vector<int> source_counts_per_depth;
  std::vector<double> effective_depths_mm;
  int node_count = 0;
  int tetra_count = 0;
};

// Full sweep: per depth peel/place/interpolate/compose, then per
// (SNR, trial, source, method) synthesize + invert + localisation error.
// Writes localisation.csv, summary.csv, dispersion.csv, and manifest.json
// into out_dir (created if needed); returns the same data in memory.
// Output bytes are independent of worker count.
StudyReport run_study(const ExperimentConfig& config,
                      const std::string& out_dir);

struct CompareRow {
  int source_id;
  double eccentricity;
  double rdm;
  double mag;
};

struct CompareBin {
  double ecc_lo;
  double ecc_hi;
  int count;
  double median_rdm;  // NaN when the bin is empty
  double median_mag;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::vector<CompareBin> bins;
  double median_rdm = 0.0;  // over all rows
  double median_mag = 0.0;
  int skipped_positions = 0;  // ladder points not inside the active region
};

// Numerical-vs-analytic forward comparison on a generated 3-shell sphere:
// sources on an eccentricity ladder in the (unpeeled) active compartment,
// RDM/MAG per source, binned by eccentricity (the last bin is > 0.98).
// Writes rdm_mag.csv, rdm_mag_bins.csv, and compare_manifest.json.
CompareReport compare_forward(const ExperimentConfig& config,
                              const std::string& out_dir);

double median_of(std::vector<double> values);  // empty -> NaN

}  // namespace peelfield

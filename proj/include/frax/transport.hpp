#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "frax/errors.hpp"
#include "frax/fem_flow.hpp"
#include "frax/linsolve.hpp"
#include "frax/mesh.hpp"

namespace frax {

/// Passive-tracer advection problem driven by a converged flow solution.
/// Inflow data is imposed on the boundary region selected by
/// inflow_boundary (facet midpoints / fracture tips).
struct TransportProblem {
  std::vector<double> cell_porosity;       // phi_m per cell
  std::vector<double> segment_porosity;    // phi_c per fracture segment
  std::vector<double> segment_thickness;   // eps per fracture segment
  std::vector<double> initial_cell;        // c_0
  std::vector<double> initial_fracture;    // c_{c,0} per fracture segment
  std::function<bool(Vec2)> inflow_boundary;
  std::function<double(double, Vec2)> inflow_value;           // c_B(t, x)
  std::function<double(double, Vec2)> fracture_inflow_value;  // c_{c,B}(t, x)
  std::vector<double> source;  // f per cell, shared with the flow problem
  double dt = 0.0;
  double t_final = 0.0;

  double source_on(int cell) const { return source.empty() ? 0.0 : source[cell]; }

  void validate(const SimplicialMesh& mesh, const FractureMesh& fm) const {
    require(dt > 0.0, ErrorCode::InvalidArgument, "transport needs dt > 0");
    require(t_final >= dt, ErrorCode::InvalidArgument, "transport needs t_final >= dt");
    require(static_cast<int>(cell_porosity.size()) == mesh.n_cells(), ErrorCode::InvalidArgument,
            "cell_porosity size mismatch");
    require(static_cast<int>(segment_porosity.size()) == fm.n_segments(), ErrorCode::InvalidArgument,
            "segment_porosity size mismatch");
    for (double p : cell_porosity)
      require(p > 0.0 && p <= 1.0, ErrorCode::InvalidArgument, "porosity must lie in (0,1]");
  }
};

/// Concentrations at one time level: cells, facet skeleton and fracture
/// vertex skeleton.
struct TransportState {
  std::vector<double> cell;             // c_h
  std::vector<double> facet;            // c-hat per mesh facet
  std::vector<double> fracture_vertex;  // c-hat_c per skeleton vertex
  double time = 0.0;
};

enum class TraceChoice { CellValue, SkeletonValue };
enum class FractureTraceChoice { FacetValue, VertexValue };

/// Upwind choices per facet side (indexed like facet_cells) and per
/// segment endpoint (tail, head). A tie (zero flux) takes the skeleton
/// value.
struct UpwindSelectors {
  std::vector<std::array<TraceChoice, 2>> facet_side;
  std::vector<std::array<FractureTraceChoice, 2>> segment_end;
  double flux_tolerance = 0.0;
};

namespace transport_detail {

/// Signed normal flux density of cell k through its local facet i.
inline double side_flux(const SimplicialMesh& mesh, const FlowSolution& flow, int k, int i) {
  return flow.velocity[k][i];
}

/// In-plane outward flux of segment s at endpoint end (0 = tail, 1 = head).
inline double endpoint_flux(const FlowSolution& flow, int s, int end) {
  return end == 0 ? -flow.fracture_flux[s][0] : flow.fracture_flux[s][1];
}

inline double flux_scale(const SimplicialMesh& mesh, const FractureMesh* fm,
                         const FlowSolution& flow) {
  double scale = 0.0;
  for (int k = 0; k < mesh.n_cells(); ++k)
    for (int i = 0; i < 3; ++i)
      scale = std::max(scale, std::abs(flow.velocity[k][i]) *
                                  mesh.facet_length(mesh.cell_facets[k][i]));
  if (fm)
    for (int s = 0; s < fm->n_segments(); ++s)
      scale = std::max({scale, std::abs(flow.fracture_flux[s][0]), std::abs(flow.fracture_flux[s][1])});
  return scale;
}

}  // namespace transport_detail

inline UpwindSelectors upwind_trace_selector(const SimplicialMesh& mesh, const FractureMesh* fm,
                                             const FlowSolution& flow) {
  UpwindSelectors sel;
  sel.flux_tolerance = 1e-13 * transport_detail::flux_scale(mesh, fm, flow);
  sel.facet_side.assign(mesh.n_facets(), {TraceChoice::SkeletonValue, TraceChoice::SkeletonValue});
  for (int k = 0; k < mesh.n_cells(); ++k) {
    for (int i = 0; i < 3; ++i) {
      int f = mesh.cell_facets[k][i];
      int side = mesh.facet_cells[f][0] == k ? 0 : 1;
      double q = transport_detail::side_flux(mesh, flow, k, i) * mesh.facet_length(f);
      sel.facet_side[f][side] =
          q > sel.flux_tolerance ? TraceChoice::CellValue : TraceChoice::SkeletonValue;
    }
  }
  if (fm) {
    sel.segment_end.assign(fm->n_segments(),
                           {FractureTraceChoice::VertexValue, FractureTraceChoice::VertexValue});
    for (int s = 0; s < fm->n_segments(); ++s)
      for (int end = 0; end < 2; ++end)
        sel.segment_end[s][end] = transport_detail::endpoint_flux(flow, s, end) > sel.flux_tolerance
                                      ? FractureTraceChoice::FacetValue
                                      : FractureTraceChoice::VertexValue;
  }
  return sel;
}

/// One implicit Euler step of the hybridized upwind finite volume scheme.
/// The coupled system in (c_h, c-hat_h, c-hat_c,h) is solved with the
/// skeleton values on non-fracture facets eliminated locally through their
/// defining upwind rows; the eliminated values are restored into the state
/// afterwards. The system matrix is constant across steps, so the LU
/// factorization is reused.
class TransportStepper {
public:
  TransportStepper(const TransportProblem& problem, const FlowSolution& flow,
                   const SimplicialMesh& mesh, const FractureMesh* fm)
      : problem_(problem), flow_(flow), mesh_(mesh), fm_(fm) {
    n_segments_ = fm ? fm->n_segments() : 0;
    n_vertices_ = fm ? fm->n_skeleton_vertices() : 0;
    require(problem.dt > 0.0, ErrorCode::InvalidArgument, "transport needs dt > 0");
    if (fm) problem.validate(mesh, *fm);

    segment_of_facet_.assign(mesh.n_facets(), -1);
    for (int s = 0; s < n_segments_; ++s) segment_of_facet_[fm->segments[s].facet] = s;

    selectors_ = upwind_trace_selector(mesh, fm, flow);
    const double tol = selectors_.flux_tolerance;

    // Resolution rule for every non-fracture facet.
    facet_rule_.assign(mesh.n_facets(), Rule{RuleKind::Average, -1, -1});
    for (int f = 0; f < mesh.n_facets(); ++f) {
      if (segment_of_facet_[f] >= 0) {
        facet_rule_[f] = {RuleKind::FractureUnknown, -1, -1};
        continue;
      }
      const int k0 = mesh.facet_cells[f][0];
      const int k1 = mesh.facet_cells[f][1];
      if (k1 < 0) {
        if (problem.inflow_boundary && problem.inflow_boundary(mesh.facet_midpoint(f)))
          facet_rule_[f] = {RuleKind::InflowData, -1, -1};
        else
          facet_rule_[f] = {RuleKind::OwnCell, k0, -1};
        continue;
      }
      const double q0 = signed_facet_flux(k0, f);
      if (q0 > tol) facet_rule_[f] = {RuleKind::UpwindCell, k0, -1};
      else if (q0 < -tol) facet_rule_[f] = {RuleKind::UpwindCell, k1, -1};
      else facet_rule_[f] = {RuleKind::Average, k0, k1};
    }

    build_matrix();
    require(boundary_contributions_.empty() || static_cast<bool>(problem.inflow_value),
            ErrorCode::InvalidArgument, "inflow facets present but no inflow_value given");
    require(dirichlet_vertices_.empty() || static_cast<bool>(problem.fracture_inflow_value),
            ErrorCode::InvalidArgument,
            "fracture inflow vertices present but no fracture_inflow_value given");
  }

  /// Initial state with skeleton values resolved consistently with the
  /// initial cell/fracture data.
  TransportState initial_state() const {
    TransportState state;
    state.time = 0.0;
    state.cell = problem_.initial_cell;
    require(static_cast<int>(state.cell.size()) == mesh_.n_cells(), ErrorCode::InvalidArgument,
            "initial_cell size mismatch");
    state.facet.assign(mesh_.n_facets(), 0.0);
    for (int f = 0; f < mesh_.n_facets(); ++f) {
      if (segment_of_facet_[f] >= 0) state.facet[f] = problem_.initial_fracture[segment_of_facet_[f]];
      else state.facet[f] = resolve_plain_facet(f, state.cell, 0.0);
    }
    state.fracture_vertex.assign(n_vertices_, 0.0);
    for (int v = 0; v < n_vertices_; ++v) {
      // Average of the incident fracture facets keeps the junction values
      // consistent with the initial fracture data.
      double sum = 0.0;
      int count = 0;
      for (int s = 0; s < n_segments_; ++s) {
        const FractureSegment& seg = fm_->segments[s];
        int sv0 = fm_->skeleton_index_of.at(seg.v0);
        int sv1 = fm_->skeleton_index_of.at(seg.v1);
        if (sv0 == v || sv1 == v) {
          sum += problem_.initial_fracture[s];
          ++count;
        }
      }
      state.fracture_vertex[v] = count > 0 ? sum / count : 0.0;
    }
    return state;
  }

  TransportState step(const TransportState& old) const {
    const int nc = mesh_.n_cells();
    const double t_new = old.time + problem_.dt;
    std::vector<double> rhs(n_unknowns_, 0.0);
    for (int k = 0; k < nc; ++k)
      rhs[k] = problem_.cell_porosity[k] * mesh_.cell_area(k) / problem_.dt * old.cell[k];
    for (int s = 0; s < n_segments_; ++s)
      rhs[nc + s] = storage_coefficient(s) * old.facet[fm_->segments[s].facet];
    for (const BoundaryContribution& bc : boundary_contributions_)
      rhs[bc.row] -= bc.coefficient * problem_.inflow_value(t_new, bc.position);
    for (const VertexData& vd : dirichlet_vertices_)
      rhs[nc + n_segments_ + vd.vertex] = problem_.fracture_inflow_value(t_new, vd.position);

    std::vector<double> x = solver_->solve(rhs);

    TransportState state;
    state.time = t_new;
    state.cell.assign(x.begin(), x.begin() + nc);
    state.facet.assign(mesh_.n_facets(), 0.0);
    for (int f = 0; f < mesh_.n_facets(); ++f) {
      if (segment_of_facet_[f] >= 0) state.facet[f] = x[nc + segment_of_facet_[f]];
      else state.facet[f] = resolve_plain_facet(f, state.cell, t_new);
    }
    state.fracture_vertex.assign(x.begin() + nc + n_segments_, x.end());
    return state;
  }

  const UpwindSelectors& selectors() const { return selectors_; }

  /// Storage coefficient eps * phi_c * |F| / dt of segment s.
  double storage_coefficient(int s) const {
    return problem_.segment_thickness[s] * problem_.segment_porosity[s] * fm_->segments[s].length /
           problem_.dt;
  }

private:
  enum class RuleKind { FractureUnknown, UpwindCell, Average, InflowData, OwnCell };
  struct Rule {
    RuleKind kind;
    int cell0;
    int cell1;
  };
  struct BoundaryContribution {
    int row;
    double coefficient;
    Vec2 position;
  };
  struct VertexData {
    int vertex;
    Vec2 position;
  };

  double signed_facet_flux(int k, int f) const {
    for (int i = 0; i < 3; ++i)
      if (mesh_.cell_facets[k][i] == f) return flow_.velocity[k][i] * mesh_.facet_length(f);
    raise(ErrorCode::InvalidArgument, "facet not incident to cell");
  }

  double resolve_plain_facet(int f, const std::vector<double>& cell, double t) const {
    const Rule& rule = facet_rule_[f];
    switch (rule.kind) {
      case RuleKind::UpwindCell:
      case RuleKind::OwnCell:
        return cell[rule.cell0];
      case RuleKind::Average:
        return 0.5 * (cell[rule.cell0] + cell[rule.cell1]);
      case RuleKind::InflowData:
        return problem_.inflow_value(t, mesh_.facet_midpoint(f));
      default:
        raise(ErrorCode::InvalidArgument, "fracture facet cannot be resolved locally");
    }
  }

  /// Adds `coef * c-hat(facet f)` to row, expanding the facet's resolution
  /// rule (fracture facets are unknowns, plain facets resolve to cells or
  /// boundary data).
  void add_facet_value(SparseBuilder& builder, int row, int f, double coef) {
    const Rule& rule = facet_rule_[f];
    const int nc = mesh_.n_cells();
    switch (rule.kind) {
      case RuleKind::FractureUnknown:
        builder.add(row, nc + segment_of_facet_[f], coef);
        break;
      case RuleKind::UpwindCell:
      case RuleKind::OwnCell:
        builder.add(row, rule.cell0, coef);
        break;
      case RuleKind::Average:
        builder.add(row, rule.cell0, 0.5 * coef);
        builder.add(row, rule.cell1, 0.5 * coef);
        break;
      case RuleKind::InflowData:
        boundary_contributions_.push_back({row, coef, mesh_.facet_midpoint(f)});
        break;
    }
  }

  void build_matrix() {
    const int nc = mesh_.n_cells();
    n_unknowns_ = nc + n_segments_ + n_vertices_;
    SparseBuilder builder(n_unknowns_, n_unknowns_);
    builder.reserve(8 * static_cast<std::size_t>(nc));
    const double tol = selectors_.flux_tolerance;

    // Cell balance rows.
    for (int k = 0; k < nc; ++k) {
      const double area = mesh_.cell_area(k);
      const double storage = problem_.cell_porosity[k] * area / problem_.dt;
      const double source = problem_.source_on(k) * area;
      require(storage - source > 0.0, ErrorCode::SingularTransportSystem,
              "source term destroys diagonal dominance of the implicit step (cell " +
                  std::to_string(k) + ")");
      builder.add(k, k, storage - source);
      for (int i = 0; i < 3; ++i) {
        const int f = mesh_.cell_facets[k][i];
        const double q = flow_.velocity[k][i] * mesh_.facet_length(f);
        if (q > tol) builder.add(k, k, q);
        else add_facet_value(builder, k, f, q);
      }
    }

    // Fracture facet rows: storage + bulk exchange + in-plane transport.
    for (int s = 0; s < n_segments_; ++s) {
      const int row = nc + s;
      const FractureSegment& seg = fm_->segments[s];
      builder.add(row, row, storage_coefficient(s));
      for (int side = 0; side < 2; ++side) {
        const int k = mesh_.facet_cells[seg.facet][side];
        if (k < 0) continue;
        const double q = signed_facet_flux(k, seg.facet);
        if (q > tol) builder.add(row, k, -q);
        else builder.add(row, row, -q);
      }
      for (int end = 0; end < 2; ++end) {
        const double g = transport_detail::endpoint_flux(flow_, s, end);
        const int v = fm_->skeleton_index_of.at(end == 0 ? seg.v0 : seg.v1);
        if (g > tol) builder.add(row, row, g);
        else builder.add(row, nc + n_segments_ + v, g);
      }
    }

    // Fracture vertex rows.
    if (fm_) {
      std::vector<std::vector<std::pair<int, int>>> incident(n_vertices_);  // (segment, end)
      for (int s = 0; s < n_segments_; ++s) {
        incident[fm_->skeleton_index_of.at(fm_->segments[s].v0)].push_back({s, 0});
        incident[fm_->skeleton_index_of.at(fm_->segments[s].v1)].push_back({s, 1});
      }
      for (int v = 0; v < n_vertices_; ++v) {
        const int row = nc + n_segments_ + v;
        const Vec2 pos = mesh_.vertices[fm_->skeleton_vertices[v]];
        const SkeletonVertexClass cls = fm_->vertex_class[v];
        const bool on_boundary =
            cls == SkeletonVertexClass::CM_D || cls == SkeletonVertexClass::CM_N;
        if (on_boundary && problem_.inflow_boundary && problem_.inflow_boundary(pos)) {
          builder.add(row, row, 1.0);
          dirichlet_vertices_.push_back({v, pos});
          continue;
        }
        double out_total = 0.0;
        for (auto [s, end] : incident[v]) {
          double g = transport_detail::endpoint_flux(flow_, s, end);
          if (g > tol) out_total += g;
        }
        if (out_total <= tol || on_boundary) {
          // Degenerate (no outgoing flux) or boundary tip: identify the
          // vertex value with the upwind average of its facets.
          builder.add(row, row, 1.0);
          if (out_total > tol) {
            for (auto [s, end] : incident[v]) {
              double g = transport_detail::endpoint_flux(flow_, s, end);
              if (g > tol) builder.add(row, nc + s, -g / out_total);
            }
          } else {
            double w = -1.0 / static_cast<double>(incident[v].size());
            for (auto [s, end] : incident[v]) builder.add(row, nc + s, w);
          }
          continue;
        }
        // Junction balance, negated so the diagonal is positive.
        for (auto [s, end] : incident[v]) {
          double g = transport_detail::endpoint_flux(flow_, s, end);
          if (g > tol) builder.add(row, nc + s, -g);
          else builder.add(row, row, -g);
        }
      }
    }

    matrix_ = builder.build();
    solver_ = std::make_unique<LuSolver>(matrix_);
  }

  const TransportProblem& problem_;
  const FlowSolution& flow_;
  const SimplicialMesh& mesh_;
  const FractureMesh* fm_;
  int n_segments_ = 0;
  int n_vertices_ = 0;
  int n_unknowns_ = 0;
  UpwindSelectors selectors_;
  std::vector<int> segment_of_facet_;
  std::vector<Rule> facet_rule_;
  std::vector<BoundaryContribution> boundary_contributions_;
  std::vector<VertexData> dirichlet_vertices_;
  SparseMatrix matrix_;
  std::unique_ptr<LuSolver> solver_;
};

/// Single step without reusing a stepper (assembles and factors once).
inline TransportState transport_step(const TransportState& state, const TransportProblem& problem,
                                     const FlowSolution& flow, const SimplicialMesh& mesh,
                                     const FractureMesh* fm) {
  TransportStepper stepper(problem, flow, mesh, fm);
  return stepper.step(state);
}

/// Advances the state until t_final, invoking the observer after every
/// step (and once on the initial state). Returns the final state.
inline TransportState run_transport(const TransportProblem& problem, const FlowSolution& flow,
                                    const SimplicialMesh& mesh, const FractureMesh* fm,
                                    const std::function<void(const TransportState&)>& observer = {}) {
  TransportStepper stepper(problem, flow, mesh, fm);
  TransportState state = stepper.initial_state();
  if (observer) observer(state);
  const int n_steps = static_cast<int>(std::ceil(problem.t_final / problem.dt - 1e-9));
  for (int n = 0; n < n_steps; ++n) {
    state = stepper.step(state);
    state.time = (n + 1) * problem.dt;
    if (observer) observer(state);
  }
  return state;
}

/// Maximum residuals of the discrete transport equations (cell balance,
/// fracture facet balance, junction balance) evaluated on a solved step.
/// Rows replaced by the boundary/degenerate identifications are not
/// balance statements and are skipped.
struct TransportResiduals {
  double cell = 0.0;
  double fracture_facet = 0.0;
  double junction = 0.0;
  double scale = 1.0;

  double max_relative() const { return std::max({cell, fracture_facet, junction}) / scale; }
};

inline TransportResiduals transport_residuals(const TransportProblem& problem,
                                              const FlowSolution& flow, const SimplicialMesh& mesh,
                                              const FractureMesh* fm, const TransportState& old,
                                              const TransportState& state) {
  TransportResiduals res;
  const UpwindSelectors sel = upwind_trace_selector(mesh, fm, flow);
  const double tol = sel.flux_tolerance;
  const double t_new = state.time;

  std::vector<int> segment_of_facet(mesh.n_facets(), -1);
  if (fm)
    for (int s = 0; s < fm->n_segments(); ++s) segment_of_facet[fm->segments[s].facet] = s;

  auto upwinded = [&](int k, int i) {
    const int f = mesh.cell_facets[k][i];
    const double q = flow.velocity[k][i] * mesh.facet_length(f);
    return q > tol ? state.cell[k] : state.facet[f];
  };

  for (int k = 0; k < mesh.n_cells(); ++k) {
    const double area = mesh.cell_area(k);
    double r = problem.cell_porosity[k] * area * (state.cell[k] - old.cell[k]) / problem.dt -
               problem.source_on(k) * area * state.cell[k];
    for (int i = 0; i < 3; ++i) {
      const double q = flow.velocity[k][i] * mesh.facet_length(mesh.cell_facets[k][i]);
      r += q * upwinded(k, i);
      res.scale = std::max(res.scale, std::abs(q));
    }
    res.cell = std::max(res.cell, std::abs(r));
  }

  if (fm) {
    for (int s = 0; s < fm->n_segments(); ++s) {
      const FractureSegment& seg = fm->segments[s];
      const double storage = problem.segment_thickness[s] * problem.segment_porosity[s] *
                             seg.length / problem.dt;
      double r = storage * (state.facet[seg.facet] - old.facet[seg.facet]);
      for (int side = 0; side < 2; ++side) {
        const int k = mesh.facet_cells[seg.facet][side];
        if (k < 0) continue;
        for (int i = 0; i < 3; ++i)
          if (mesh.cell_facets[k][i] == seg.facet) r -= flow.velocity[k][i] *
                                                        mesh.facet_length(seg.facet) * upwinded(k, i);
      }
      for (int end = 0; end < 2; ++end) {
        const double g = transport_detail::endpoint_flux(flow, s, end);
        const int v = fm->skeleton_index_of.at(end == 0 ? seg.v0 : seg.v1);
        r += g * (g > tol ? state.facet[seg.facet] : state.fracture_vertex[v]);
      }
      res.fracture_facet = std::max(res.fracture_facet, std::abs(r));
    }

    std::vector<std::vector<std::pair<int, int>>> incident(fm->n_skeleton_vertices());
    for (int s = 0; s < fm->n_segments(); ++s) {
      incident[fm->skeleton_index_of.at(fm->segments[s].v0)].push_back({s, 0});
      incident[fm->skeleton_index_of.at(fm->segments[s].v1)].push_back({s, 1});
    }
    for (int v = 0; v < fm->n_skeleton_vertices(); ++v) {
      const SkeletonVertexClass cls = fm->vertex_class[v];
      if (cls == SkeletonVertexClass::CM_D || cls == SkeletonVertexClass::CM_N) continue;
      double out_total = 0.0;
      for (auto [s, end] : incident[v]) {
        double g = transport_detail::endpoint_flux(flow, s, end);
        if (g > tol) out_total += g;
      }
      if (out_total <= tol) continue;  // identification row, not a balance
      double r = 0.0;
      for (auto [s, end] : incident[v]) {
        const double g = transport_detail::endpoint_flux(flow, s, end);
        r += g * (g > tol ? state.facet[fm->segments[s].facet] : state.fracture_vertex[v]);
      }
      res.junction = std::max(res.junction, std::abs(r));
    }
  }
  return res;
}

/// Discrete mass bookkeeping of one step: the storage change must equal
/// source input minus net upwinded boundary outflow, scaled by dt.
struct MassBalance {
  double storage_delta = 0.0;
  double boundary_outflux = 0.0;  // positive = leaving the domain
  double source = 0.0;
  double scale = 1.0;

  double defect() const { return storage_delta + (boundary_outflux - source); }
  double relative_defect() const { return std::abs(defect()) / scale; }
};

inline MassBalance step_mass_balance(const TransportProblem& problem, const FlowSolution& flow,
                                     const SimplicialMesh& mesh, const FractureMesh* fm,
                                     const TransportState& old, const TransportState& state) {
  MassBalance mb;
  const UpwindSelectors sel = upwind_trace_selector(mesh, fm, flow);
  const double tol = sel.flux_tolerance;

  std::vector<int> segment_of_facet(mesh.n_facets(), -1);
  if (fm)
    for (int s = 0; s < fm->n_segments(); ++s) segment_of_facet[fm->segments[s].facet] = s;

  for (int k = 0; k < mesh.n_cells(); ++k) {
    mb.storage_delta +=
        problem.cell_porosity[k] * mesh.cell_area(k) * (state.cell[k] - old.cell[k]);
    mb.source += problem.source_on(k) * mesh.cell_area(k) * state.cell[k] * problem.dt;
  }
  if (fm)
    for (int s = 0; s < fm->n_segments(); ++s)
      mb.storage_delta += problem.segment_thickness[s] * problem.segment_porosity[s] *
                          fm->segments[s].length *
                          (state.facet[fm->segments[s].facet] - old.facet[fm->segments[s].facet]);

  for (int f = 0; f < mesh.n_facets(); ++f) {
    if (!mesh.is_boundary_facet(f)) continue;
    const int k = mesh.facet_cells[f][0];
    for (int i = 0; i < 3; ++i) {
      if (mesh.cell_facets[k][i] != f) continue;
      const double q = flow.velocity[k][i] * mesh.facet_length(f);
      const double value = q > tol ? state.cell[k] : state.facet[f];
      mb.boundary_outflux += q * value * problem.dt;
      mb.scale = std::max(mb.scale, std::abs(q * value * problem.dt));
    }
  }
  if (fm) {
    for (int s = 0; s < fm->n_segments(); ++s) {
      const FractureSegment& seg = fm->segments[s];
      for (int end = 0; end < 2; ++end) {
        const int v = fm->skeleton_index_of.at(end == 0 ? seg.v0 : seg.v1);
        const SkeletonVertexClass cls = fm->vertex_class[v];
        if (cls != SkeletonVertexClass::CM_D && cls != SkeletonVertexClass::CM_N) continue;
        const double g = transport_detail::endpoint_flux(flow, s, end);
        const double value = g > tol ? state.facet[seg.facet] : state.fracture_vertex[v];
        mb.boundary_outflux += g * value * problem.dt;
      }
    }
  }
  mb.scale = std::max({mb.scale, std::abs(mb.storage_delta), 1e-300});
  return mb;
}

}  // namespace frax

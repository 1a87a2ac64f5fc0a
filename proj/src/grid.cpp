#include "rspde/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace rspde {

Grid make_grid(double T, double L, std::size_t nt, std::size_t nx) {
    if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("make_grid: T must be positive");
    if (!(L > 0.0) || !std::isfinite(L)) throw std::invalid_argument("make_grid: L must be positive");
    if (nt < 1) throw std::invalid_argument("make_grid: nt must be >= 1");
    if (nx < 2) throw std::invalid_argument("make_grid: nx must be >= 2");
    Grid g;
    g.T = T;
    g.L = L;
    g.nt = nt;
    g.nx = nx;
    g.dt = T / static_cast<double>(nt);
    g.dx = L / static_cast<double>(nx);
    g.explicit_stable = g.dt <= 0.5 * g.dx * g.dx;
    return g;
}

Grid refine(const Grid& g, std::size_t time_factor, std::size_t space_factor) {
    return make_grid(g.T, g.L, g.nt * time_factor, g.nx * space_factor);
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
    if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

// ---------------------------------------------------------------- Field

Field::Field(const Grid& grid, double fill)
    : grid_(grid), stride_(grid.nx + 1), values_((grid.nt + 1) * (grid.nx + 1), fill) {}

bool Field::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Field::min_value() const { return *std::min_element(values_.begin(), values_.end()); }
double Field::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

Field& Field::operator+=(const Field& o) {
    require_same_grid(grid_, o.grid_, "Field::operator+=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
    return *this;
}

Field& Field::operator-=(const Field& o) {
    require_same_grid(grid_, o.grid_, "Field::operator-=");
    for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
    return *this;
}

Field& Field::operator*=(double c) {
    for (double& v : values_) v *= c;
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double c, Field a) { return a *= c; }

// ---------------------------------------------------------------- norms

double weighted_row_norm(const Field& field, WeightParams w, std::size_t i) {
    const Grid& g = field.grid();
    if (i > g.nt) throw std::invalid_argument("weighted_row_norm: time index out of range");
    double best = 0.0;
    auto row = field.row(i);
    for (std::size_t j = 0; j <= g.nx; ++j) {
        best = std::max(best, std::exp(-w.r * g.x(j)) * std::abs(row[j]));
    }
    return best;
}

double weighted_sup_norm(const Field& field, WeightParams w, std::size_t up_to) {
    const Grid& g = field.grid();
    if (up_to > g.nt) throw std::invalid_argument("weighted_sup_norm: time index out of range");
    std::vector<double> weight(g.nx + 1);
    for (std::size_t j = 0; j <= g.nx; ++j) weight[j] = std::exp(-w.r * g.x(j));
    double best = 0.0;
    for (std::size_t i = 0; i <= up_to; ++i) {
        auto row = field.row(i);
        for (std::size_t j = 0; j <= g.nx; ++j) best = std::max(best, weight[j] * std::abs(row[j]));
    }
    return best;
}

double weighted_sup_norm(const Field& field, WeightParams w) {
    return weighted_sup_norm(field, w, field.grid().nt);
}

// ---------------------------------------------------------------- Control

Control::Control(const Grid& grid, double fill) : grid_(grid), gdot_(grid.nt * grid.nx, fill) {}

double Control::at_node(std::size_t i, std::size_t j) const {
    if (j == 0) return (*this)(i, 0);
    if (j >= grid_.nx) return (*this)(i, grid_.nx - 1);
    return 0.5 * ((*this)(i, j - 1) + (*this)(i, j));
}

Control& Control::operator*=(double c) {
    for (double& v : gdot_) v *= c;
    return *this;
}

Control& Control::operator+=(const Control& o) {
    require_same_grid(grid_, o.grid_, "Control::operator+=");
    for (std::size_t k = 0; k < gdot_.size(); ++k) gdot_[k] += o.gdot_[k];
    return *this;
}

Control operator+(Control a, const Control& b) { return a += b; }
Control operator*(double c, Control a) { return a *= c; }

double cm_norm(const Control& g) {
    double s = 0.0;
    for (double v : g.values()) s += v * v;
    return std::sqrt(s * g.grid().dt * g.grid().dx);
}

Control project_to_SN(const Control& g, double N) {
    if (!(N > 0.0)) throw std::invalid_argument("project_to_SN: N must be positive");
    const double norm = cm_norm(g);
    if (norm <= N) return g;
    Control out = g;
    out *= N / norm;
    return out;
}

// ---------------------------------------------------------------- CSV

namespace {

void append_number(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

}  // namespace

std::string field_to_csv(const Field& f, const char* value_name) {
    const Grid& g = f.grid();
    std::string out = "t,x,";
    out += value_name;
    out += '\n';
    out.reserve(out.size() + g.time_nodes() * g.space_nodes() * 48);
    for (std::size_t i = 0; i <= g.nt; ++i) {
        for (std::size_t j = 0; j <= g.nx; ++j) {
            append_number(out, g.t(i));
            out += ',';
            append_number(out, g.x(j));
            out += ',';
            append_number(out, f(i, j));
            out += '\n';
        }
    }
    return out;
}

std::string control_to_csv(const Control& c) {
    const Grid& g = c.grid();
    std::string out = "t,x,value\n";
    for (std::size_t i = 0; i < g.nt; ++i) {
        for (std::size_t j = 0; j < g.nx; ++j) {
            append_number(out, g.t(i) + 0.5 * g.dt);
            out += ',';
            append_number(out, g.x(j) + 0.5 * g.dx);
            out += ',';
            append_number(out, c(i, j));
            out += '\n';
        }
    }
    return out;
}

Field field_from_csv(const Grid& grid, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("field_from_csv: empty input");
    Field f(grid);
    std::size_t k = 0;
    auto vals = f.values();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto last = line.rfind(',');
        if (last == std::string::npos) throw std::invalid_argument("field_from_csv: malformed row");
        if (k >= vals.size()) throw std::invalid_argument("field_from_csv: too many rows for grid");
        vals[k++] = std::stod(line.substr(last + 1));
    }
    if (k != vals.size()) throw std::invalid_argument("field_from_csv: row count does not match grid");
    return f;
}

}  // namespace rspde

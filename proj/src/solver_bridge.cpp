#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "delta/json_io.hpp"
#include "delta/milp.hpp"

namespace delta {

namespace fs = std::filesystem;

std::string default_solver_cmd() {
  const char* env = std::getenv("DELTA_SOLVER_CMD");
  return env ? std::string(env) : std::string();
}

namespace {

std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
  std::string marker = "{" + key + "}";
  size_t pos;
  while ((pos = tmpl.find(marker)) != std::string::npos)
    tmpl.replace(pos, marker.size(), value);
  return tmpl;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

SolveStatus status_from_words(const std::string& words) {
  std::string lower;
  for (char c : words) lower.push_back(static_cast<char>(std::tolower(c)));
  if (lower.find("infeasible") != std::string::npos) return SolveStatus::Infeasible;
  if (lower.find("time") != std::string::npos || lower.find("stopped") != std::string::npos)
    return SolveStatus::Timeout;
  if (lower.find("optimal") != std::string::npos) return SolveStatus::Optimal;
  if (lower.find("feasible") != std::string::npos) return SolveStatus::Feasible;
  if (lower.find("unbounded") != std::string::npos) return SolveStatus::Error;
  return SolveStatus::Error;
}

}  // namespace

Solution parse_solution_text(const std::string& text) {
  Solution sol;
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  if (lines.empty()) {
    sol.raw_status = "empty solution file";
    return sol;
  }

  // HiGHS dialect: a "Model status" header, an Objective line, then
  // name/value pairs inside the "# Columns" section.
  bool highs = false;
  for (const auto& l : lines)
    if (l.rfind("Model status", 0) == 0 || l.rfind("# Columns", 0) == 0) highs = true;
  if (highs) {
    bool in_columns = false;
    for (size_t i = 0; i < lines.size(); ++i) {
      const std::string& l = lines[i];
      if (l.rfind("Model status", 0) == 0 && i + 1 < lines.size()) {
        sol.raw_status = lines[i + 1];
        sol.status = status_from_words(lines[i + 1]);
      } else if (l.rfind("Objective", 0) == 0) {
        std::istringstream ls(l);
        std::string word;
        ls >> word >> sol.objective;
      } else if (l.rfind("# Columns", 0) == 0) {
        in_columns = true;
      } else if (l.rfind("#", 0) == 0) {
        in_columns = false;
      } else if (in_columns) {
        std::istringstream ls(l);
        std::string name;
        double value;
        if (ls >> name >> value) sol.values[name] = value;
      }
    }
    return sol;
  }

  // CBC dialect: "<status> - objective value <v>" first, then rows of
  // "<index> <name> <value> <reduced cost>".
  {
    std::istringstream first(lines[0]);
    std::string head;
    first >> head;
    if (lines[0].find("objective value") != std::string::npos || head == "Optimal" ||
        head == "Infeasible" || head == "Unbounded" || head == "Stopped") {
      sol.raw_status = lines[0];
      sol.status = status_from_words(lines[0]);
      auto pos = lines[0].find("objective value");
      if (pos != std::string::npos) {
        std::istringstream os(lines[0].substr(pos + 15));
        os >> sol.objective;
      }
      for (size_t i = 1; i < lines.size(); ++i) {
        std::istringstream ls(lines[i]);
        std::string first_tok, name;
        double value;
        if (!(ls >> first_tok)) continue;
        if (is_number(first_tok)) {
          if (ls >> name >> value) sol.values[name] = value;
        } else if (std::istringstream(lines[i]) >> name >> value) {
          sol.values[name] = value;
        }
      }
      return sol;
    }
  }

  // Fallback: bare name/value pairs.
  for (const auto& l : lines) {
    std::istringstream ls(l);
    std::string name;
    double value;
    if (ls >> name >> value) sol.values[name] = value;
  }
  sol.status = sol.values.empty() ? SolveStatus::Error : SolveStatus::Feasible;
  sol.raw_status = "name/value pairs";
  return sol;
}

Solution solve(const MilpModel& model, const std::string& solver_cmd, double timeout_s,
               const std::map<std::string, double>* hot_start,
               const std::string& work_dir) {
  if (solver_cmd.empty())
    throw SolverUnavailableError(
        "no solver command configured (set DELTA_SOLVER_CMD or pass --solver-cmd)");

  fs::path dir;
  if (work_dir.empty()) {
    dir = fs::temp_directory_path() /
          ("delta_milp_" + std::to_string(
                               std::chrono::steady_clock::now().time_since_epoch().count()));
  } else {
    dir = work_dir;
  }
  fs::create_directories(dir);

  fs::path lp_path = dir / "model.lp";
  fs::path sol_path = dir / "model.sol";
  fs::path mst_path = dir / "model.mst";
  write_file(lp_path.string(), emit_lp(model));
  if (hot_start) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& [name, value] : *hot_start) os << name << " " << value << "\n";
    write_file(mst_path.string(), os.str());
  }

  std::string cmd = solver_cmd;
  cmd = substitute(cmd, "lp", lp_path.string());
  cmd = substitute(cmd, "sol", sol_path.string());
  cmd = substitute(cmd, "timeout", std::to_string(timeout_s));
  cmd = substitute(cmd, "mst", hot_start ? mst_path.string() : "");
  cmd += " > " + (dir / "solver.log").string() + " 2>&1";

  auto wall_start = std::chrono::steady_clock::now();
  int rc = std::system(cmd.c_str());
  auto wall_end = std::chrono::steady_clock::now();

  if (!fs::exists(sol_path)) {
    std::string log;
    try {
      log = read_file((dir / "solver.log").string());
    } catch (...) {
    }
    if (rc != 0)
      throw SolverUnavailableError("solver command failed (exit " + std::to_string(rc) +
                                   "): " + cmd + "\n" + log.substr(0, 500));
    Solution sol;
    sol.status = SolveStatus::Error;
    sol.raw_status = "solver produced no solution file";
    return sol;
  }

  Solution sol = parse_solution_text(read_file(sol_path.string()));
  sol.solve_seconds =
      std::chrono::duration<double>(wall_end - wall_start).count();
  if ((sol.status == SolveStatus::Optimal || sol.status == SolveStatus::Feasible ||
       sol.status == SolveStatus::Timeout) &&
      !sol.values.empty() && sol.objective == 0.0) {
    // Some dialects omit the objective line; recompute from values.
    double obj = 0.0;
    for (auto [idx, coeff] : model.objective)
      obj += coeff * [&]() {
        auto it = sol.values.find(model.variables[idx].name);
        return it == sol.values.end() ? 0.0 : it->second;
      }();
    sol.objective = obj;
  }
  return sol;
}

}  // namespace delta

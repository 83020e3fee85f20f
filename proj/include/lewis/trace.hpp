#pragma once

namespace lewis {

enum class StepType {
  init,
  descent,
  round_pass,
  coordinate_step,
  extract,
  fixed_point,
};

const char* step_type_name(StepType type);

struct TraceRow {
  long iteration = 0;
  StepType type = StepType::init;
  double objective = 0;
  double rho_max = 0;
  double optimality_residual = 0;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void emit(const TraceRow& row) = 0;
};

}  // namespace lewis

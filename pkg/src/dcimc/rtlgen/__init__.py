from .generate import generate_structural_netlist, output_width
from .netlist import (
    CELLS,
    Instance,
    Module,
    Netlist,
    Port,
    cells_verilog,
    parse_netlist,
    serialize_verilog,
    tally_cells,
    tally_cost,
)
from .timing import Timer, longest_path_delay, stage_delays
from .emit import ReconciliationError, reconcile, write_design

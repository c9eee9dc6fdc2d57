"""Link-level simulator and phase-configuration library for RIS-aided OFDM."""

from .errors import (DegenerateGeometryError, InfeasibleScenarioError,
                     InvalidScenarioError, MetricError, SimulatorError)
from .scene import (SPEED_OF_LIGHT, ApRisPath, DirectPath, PathAngles, PathProfile,
                    PathSet, RisGrid, RisUePath, Scenario, array_response,
                    default_mobile_scenario, default_stationary_scenario,
                    derive_geometry, doppler_frequency, element_offsets,
                    wavelength, wrap_phase)
from .channel import (ChannelRealization, block_spectra, composite_matrix,
                      delay_reference, direct_taps, export_channel_csv,
                      freq_response, full_freq_response, import_channel_csv,
                      n_taps, synthesize_channel)
from .metrics import (PowerAllocation, RateReport, achievable_rate, coherent_gains,
                      coherent_rate, efficiency_rate, quantize, residual_doppler,
                      uniform_allocation, waterfill)
from .configurators import (AoResult, AoSettings, RisConfiguration, ScaState,
                            ao_optimize, export_config_csv, make_sca_state,
                            sca_inner_solve, sca_surrogate, stm_candidate,
                            ti_stm, tv_stm)
from .neural import (NnParameters, TrainSettings, build_features, forward,
                     infer_config, init_params, load_params, loss_and_gradients,
                     mean_rate, relu, save_params, train)
from .harness import (ExperimentSpec, ResultRow, brute_force_config_oracle,
                      correlated_realizations, emit_results, jitter_path_set,
                      random_tiny_scenario, run_experiment)

# Copyright 2026 The OIM Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Python bindings for the oim weakly supervised detection library."""

from oim._oim import (  # noqa: F401
    Dataset,
    Model,
    ProposalSet,
    RuntimeFailure,
    Sample,
    TrainConfig,
    ValidationError,
    __version__,
    apply_oracle_scores,
    evaluate,
    generate,
    iou,
    load_checkpoint,
    load_dataset,
    mine,
    mining_recall,
    nms,
    save_checkpoint,
    save_dataset,
    train,
)

import os
import json
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from model import KeyphrasePointerGenerator, ModelConfig, config_to_dict

logger = logging.getLogger(__name__)

CHECKPOINT_HEADER = b'auxsumm-ckpt v1'
ACCUMULATOR_PREFIX = 'accumulator/'


class CheckpointError(ValueError):
    """Raised when a checkpoint file is missing or malformed"""

    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


def save_checkpoint(path: str, tensors: Dict[str, np.ndarray], metadata: Dict):
    """
    Header line, one line of JSON metadata, then each tensor in sorted name
    order as a '<name> <shape>' line followed by little-endian float32 bytes.
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    tmp_path = path + '.tmp'
    with open(tmp_path, 'wb') as f:
        f.write(CHECKPOINT_HEADER + b'\n')
        f.write(json.dumps(metadata, sort_keys=True, separators=(',', ':')).encode('utf-8') + b'\n')
        for name in sorted(tensors):
            array = np.asarray(tensors[name])
            if ' ' in name or '\n' in name:
                raise CheckpointError(path, f"tensor name '{name}' contains whitespace")
            shape = ','.join(str(d) for d in array.shape)
            f.write(f"{name} {shape}\n".encode('utf-8'))
            f.write(np.ascontiguousarray(array, dtype='<f4').tobytes())
            f.write(b'\n')
    os.replace(tmp_path, path)
    logger.info(f"Checkpoint saved to {path} ({len(tensors)} tensors)")


def load_checkpoint(path: str) -> Tuple[Dict, Dict[str, np.ndarray]]:
    if not os.path.exists(path):
        raise CheckpointError(path, "checkpoint does not exist")

    tensors: Dict[str, np.ndarray] = {}
    with open(path, 'rb') as f:
        if f.readline().rstrip(b'\n') != CHECKPOINT_HEADER:
            raise CheckpointError(path, "bad header line")
        try:
            metadata = json.loads(f.readline().decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(path, f"bad metadata block ({e})")

        while True:
            line = f.readline()
            if not line:
                break
            try:
                name, shape_text = line.decode('utf-8').rstrip('\n').split(' ')
                shape = tuple(int(d) for d in shape_text.split(',')) if shape_text else ()
            except ValueError:
                raise CheckpointError(path, f"bad tensor header {line!r}")
            count = int(np.prod(shape)) if shape else 1
            data = f.read(4 * count)
            if len(data) != 4 * count or f.read(1) != b'\n':
                raise CheckpointError(path, f"truncated tensor '{name}'")
            tensors[name] = np.frombuffer(data, dtype='<f4').astype(np.float32).reshape(shape)

    return metadata, tensors


def save_model(path: str, model: KeyphrasePointerGenerator, iteration: int = 0, seed: int = 0,
               accumulators: Optional[Dict[str, np.ndarray]] = None, extra: Optional[Dict] = None):
    tensors = dict(model.params)
    for name, acc in (accumulators or {}).items():
        tensors[ACCUMULATOR_PREFIX + name] = acc
    metadata = {'config': config_to_dict(model.config), 'iteration': int(iteration), 'seed': int(seed)}
    if extra:
        metadata.update(extra)
    save_checkpoint(path, tensors, metadata)


def load_model(path: str, dtype: Optional[str] = None) -> Tuple[KeyphrasePointerGenerator, Dict, Dict[str, np.ndarray]]:
    """Rebuild the model; returns (model, metadata, accumulators)"""
    metadata, tensors = load_checkpoint(path)
    if 'config' not in metadata:
        raise CheckpointError(path, "metadata has no model config")
    try:
        config = ModelConfig(**metadata['config'])
    except TypeError as e:
        raise CheckpointError(path, f"bad model config ({e})")
    if dtype is not None:
        config.dtype = dtype

    params = {name: t.astype(config.dtype) for name, t in tensors.items() if not name.startswith(ACCUMULATOR_PREFIX)}
    accumulators = {name[len(ACCUMULATOR_PREFIX):]: t.astype(config.dtype)
                    for name, t in tensors.items() if name.startswith(ACCUMULATOR_PREFIX)}
    try:
        model = KeyphrasePointerGenerator(config, params)
    except ValueError as e:
        raise CheckpointError(path, str(e))
    logger.info(f"Loaded model from {path} (iteration {metadata.get('iteration', 0)})")
    return model, metadata, accumulators

from .protocol import ProtocolId, ProtocolSpec, Split, RunMode, PROTOCOLS, get_protocols
from .manifest import (DatasetManifest, ManifestRow, load_manifest, parse_manifest, write_manifest,
                       load_sample, load_samples, MANIFEST_COLUMNS)

import * as fs from 'fs';

import { createApp } from './app';
import { SamSubprocessSegmenter } from './samSubprocess';
import { IntensitySegmenter, Segmenter } from './segmenter';

/**
 * Entry point. Configuration via environment variables:
 *
 *   PORT             listen port (default 8123)
 *   HOST             bind address (default 127.0.0.1)
 *   SAM_CHECKPOINT   path to a SAM checkpoint; enables the SAM worker
 *   SAM_MODEL_TYPE   registry key for the checkpoint (default vit_h)
 *   SAM_DEVICE       torch device for the worker (default cpu)
 *   SAM_PYTHON       python executable for the worker (default python3)
 *   MAX_CONCURRENT   in-flight request limit before 503 (default 4)
 *   TOLERANCE        intensity fallback luma tolerance (default 12)
 *
 * Without SAM_CHECKPOINT the service falls back to the deterministic
 * intensity segmenter (useful for protocol testing and environments
 * without model weights).
 */
function main(): void {
  const port = Number(process.env.PORT ?? 8123);
  const host = process.env.HOST ?? '127.0.0.1';
  const maxConcurrent = Number(process.env.MAX_CONCURRENT ?? 4);
  const checkpoint = process.env.SAM_CHECKPOINT;

  let segmenter: Segmenter;
  if (checkpoint) {
    if (!fs.existsSync(checkpoint)) {
      console.error(`SAM_CHECKPOINT does not exist: ${checkpoint}`);
      process.exit(1);
    }
    segmenter = new SamSubprocessSegmenter({
      checkpoint,
      modelType: process.env.SAM_MODEL_TYPE ?? 'vit_h',
      device: process.env.SAM_DEVICE ?? 'cpu',
      python: process.env.SAM_PYTHON ?? 'python3',
    });
  } else {
    console.warn('SAM_CHECKPOINT not set: serving the deterministic intensity segmenter');
    segmenter = new IntensitySegmenter(Number(process.env.TOLERANCE ?? 12));
  }

  const app = createApp({ segmenter, maxConcurrent });
  app.listen(port, host, () => {
    console.log(`sam-service (${segmenter.name}) listening on http://${host}:${port}`);
  });
}

main();

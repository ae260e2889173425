import express, { Express, NextFunction, Request, Response } from 'express';

import { decodeImage, decodeMask, GrayImage } from './png';
import { Prompt, SegmentRequestSchema } from './protocol';
import { Segmenter } from './segmenter';

export interface AppConfig {
  segmenter: Segmenter;
  /** requests beyond this many in flight are answered 503 */
  maxConcurrent: number;
}

function promptBoundsError(prompt: Prompt, image: GrayImage): string | null {
  if (prompt.type === 'point') {
    if (prompt.x < 0 || prompt.x >= image.width) return 'prompt.x';
    if (prompt.y < 0 || prompt.y >= image.height) return 'prompt.y';
    return null;
  }
  if (prompt.x_min > prompt.x_max) return 'prompt.x_min';
  if (prompt.y_min > prompt.y_max) return 'prompt.y_min';
  if (prompt.x_min < 0 || prompt.x_max >= image.width) return 'prompt.x_max';
  if (prompt.y_min < 0 || prompt.y_max >= image.height) return 'prompt.y_max';
  return null;
}

export function createApp(config: AppConfig): Express {
  const app = express();
  app.use(express.json({ limit: '64mb' }));

  let inFlight = 0;

  app.get('/v1/health', (_req, res) => {
    res.status(200).type('text/plain').send('ok');
  });

  app.post('/v1/segment', async (req: Request, res: Response) => {
    if (inFlight >= config.maxConcurrent) {
      res.status(503).json({ error: 'overloaded, retry later' });
      return;
    }
    inFlight++;
    try {
      const parsed = SegmentRequestSchema.safeParse(req.body);
      if (!parsed.success) {
        const issue = parsed.error.issues[0];
        const field = issue.path.join('.') || 'body';
        res.status(400).json({ error: `invalid request field: ${field}`, detail: issue.message });
        return;
      }
      const { image_png_base64, prompt } = parsed.data;

      let image: GrayImage;
      try {
        image = decodeImage(Buffer.from(image_png_base64, 'base64'));
      } catch (err) {
        res.status(400).json({
          error: 'invalid request field: image_png_base64',
          detail: err instanceof Error ? err.message : String(err),
        });
        return;
      }

      const badField = promptBoundsError(prompt, image);
      if (badField !== null) {
        res.status(400).json({
          error: `invalid request field: ${badField}`,
          detail: `prompt out of bounds for ${image.width}x${image.height} image`,
        });
        return;
      }

      let maskB64: string;
      try {
        maskB64 = await config.segmenter.segment({ imagePngBase64: image_png_base64, image, prompt });
      } catch (err) {
        res.status(500).json({ error: err instanceof Error ? err.message : String(err) });
        return;
      }

      // never emit a mask that violates the dimension law
      const mask = decodeMask(Buffer.from(maskB64, 'base64'));
      if (mask.width !== image.width || mask.height !== image.height) {
        res.status(500).json({
          error: `segmenter produced a ${mask.width}x${mask.height} mask for a ${image.width}x${image.height} image`,
        });
        return;
      }

      res.status(200).json({ mask_png_base64: maskB64 });
    } finally {
      inFlight--;
    }
  });

  // malformed JSON bodies and other middleware failures
  app.use((err: Error, _req: Request, res: Response, _next: NextFunction) => {
    res.status(400).json({ error: 'invalid request field: body', detail: err.message });
  });

  return app;
}

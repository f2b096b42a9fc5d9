public class Main {
    static int max(int[] xs) {
        int best = xs[0];
        for (int i = 1; i < xs.length; i++) {
            if (xs[i] > best) {
                best = xs[i];
            }
        }
        return best;
    }

    public static void main(String[] args) {
        int[] data = {3, 9, 4, 1};
        System.out.println("max " + max(data));
    }
}

public class Main {
    static int max(int[] xs) {
        int best = xs[0];
        for (int x : xs) {
            if (x > best) best = x;
        }
        return best;
    }

    public static void main(String[] args) {
        int[] data = {3, 9, 4, 1};
        System.out.println("max " + max(data));
    }
}
